#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedet/rng.hpp"
#include "fedet/tensor.hpp"

namespace fedet {

struct LabeledExample {
  Tensor features;
  int label = 0;
};

struct ClientShard {
  int client_id = 0;
  std::vector<LabeledExample> examples;
};

/// Unlabeled inputs held only by the server for distillation.
struct PublicSet {
  std::vector<Tensor> inputs;
};

struct PartitionSpec {
  std::size_t client_count = 1;
  double alpha = 1.0;
  std::uint64_t seed = 0;
  // Smallest shard the partition may produce; draws are repeated on a
  // deterministically advanced stream until every shard satisfies it.
  std::size_t min_shard_size = 1;
};

/// Gaussian blobs: class c is centered on a seeded unit-sphere point and
/// sampled with isotropic stddev `spread`; exactly n_per_class examples per
/// class, grouped by class in the output.
std::vector<LabeledExample> generate_synthetic(std::size_t n_classes,
                                               std::size_t dim,
                                               std::size_t n_per_class,
                                               double spread,
                                               std::uint64_t seed);

/// Per class, draws proportions ~ Dir_K(alpha) and assigns that class's
/// examples to clients multinomially. Output is an exact partition of the
/// dataset into client_count shards.
std::vector<ClientShard> dirichlet_partition(
    const std::vector<LabeledExample>& dataset, const PartitionSpec& spec);

/// Strips labels and perturbs every feature with N(0, noise_std^2) noise.
PublicSet derive_public_set(const std::vector<LabeledExample>& dataset,
                            double noise_std, std::uint64_t seed);

// CSV with header `label,f0,...,f{d-1}`; label -1 marks unlabeled rows.
// Values are written with 17 significant digits so a round trip is exact.
void save_csv(std::span<const LabeledExample> examples, const std::string& path);
void save_csv(const PublicSet& public_set, const std::string& path);
std::vector<LabeledExample> load_csv(const std::string& path);
PublicSet load_public_csv(const std::string& path);

/// Uniform mini-batches from one shard. Within a batch sampling is without
/// replacement when batch_size <= shard size, with replacement otherwise;
/// successive batches are independent draws.
class MinibatchIterator {
 public:
  MinibatchIterator(const ClientShard& shard, std::size_t batch_size, Rng rng);

  /// Indices into shard.examples for the next batch.
  std::vector<std::size_t> next();

 private:
  const ClientShard* shard_;
  std::size_t batch_size_;
  Rng rng_;
};

}  // namespace fedet

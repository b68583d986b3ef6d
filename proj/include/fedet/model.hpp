#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "fedet/nn.hpp"

namespace fedet {

/// Hidden widths of the backbone; the backbone always ends in a layer
/// producing feature_dim activations that feed the shared head.
struct BackboneSpec {
  std::vector<std::size_t> hidden_widths;
  std::size_t input_dim = 0;
  std::size_t feature_dim = 0;
};

/// The representation head shared in shape across every model:
/// Dense[u -> u, ReLU] then Dense[u -> N, identity] (softmax at inference).
struct Head {
  DenseLayer hidden;
  DenseLayer output;

  std::size_t feature_dim() const { return hidden.in_dim(); }
  std::size_t n_classes() const { return output.out_dim(); }
};

/// A backbone plus the shared-shape head, stored as one layer stack
/// (backbone layers followed by the two head layers).
class Model {
 public:
  std::vector<DenseLayer> layers;

  std::size_t head_start() const { return layers.size() - 2; }
  std::size_t input_dim() const { return layers.front().in_dim(); }
  std::size_t n_classes() const { return layers.back().out_dim(); }

  /// Exact count of trainable scalars (weights + biases).
  std::size_t param_count() const;

  Head head() const;
  void set_head(const Head& head);

  Tensor predict(const Tensor& input) const;
};

/// Xavier-uniform weights, zero biases; deterministic in seed.
Model build_model(const BackboneSpec& spec, std::size_t n_classes,
                  std::uint64_t seed);

/// The server-side model pool: U small models keyed 1..U, the strictly
/// larger server model, and the static client -> model-id designation.
struct ModelRegistry {
  std::map<int, Model> small_models;
  Model server_model;
  std::map<int, int> assignment;

  std::size_t param_count_of(int model_id) const;
};

ModelRegistry registry_init(const std::vector<BackboneSpec>& small_specs,
                            const BackboneSpec& server_spec,
                            std::size_t n_classes, std::uint64_t seed);

/// Uniform random designation of model ids 1..model_count, one per client.
std::map<int, int> assign_models(const std::vector<int>& client_ids,
                                 std::size_t model_count, std::uint64_t seed);

}  // namespace fedet

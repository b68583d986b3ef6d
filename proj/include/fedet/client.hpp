#pragma once

#include <span>

#include "fedet/data.hpp"
#include "fedet/model.hpp"

namespace fedet {

struct LocalTrainConfig {
  std::size_t iterations = 1;   // tau
  std::size_t batch_size = 1;   // b
  double learning_rate = 0.0;   // eta, constant across iterations
};

/// Runs exactly cfg.iterations mini-batch SGD steps of cross-entropy on the
/// shard, starting from a copy of `snapshot` (which is left untouched).
Model local_train(const Model& snapshot, const ClientShard& shard,
                  const LocalTrainConfig& cfg, Rng rng);

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

/// Argmax accuracy (ties to the lowest class index) and mean cross-entropy.
EvalResult evaluate(const Model& model, std::span<const LabeledExample> dataset);

}  // namespace fedet

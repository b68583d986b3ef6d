#include "fedet/client.hpp"

#include <cmath>

#include "fedet/errors.hpp"

namespace fedet {

Model local_train(const Model& snapshot, const ClientShard& shard,
                  const LocalTrainConfig& cfg, Rng rng) {
  if (shard.examples.empty()) throw StateError("local_train: empty shard");
  if (cfg.iterations < 1) throw ArgumentError("local_train: tau < 1");
  if (cfg.batch_size < 1) throw ArgumentError("local_train: b < 1");
  if (cfg.learning_rate < 0.0) throw ArgumentError("local_train: eta < 0");

  Model model = snapshot;
  MinibatchIterator batches(shard, cfg.batch_size, rng);
  for (std::size_t step = 0; step < cfg.iterations; ++step) {
    LossGrad batch_grad = zero_grads_like(model.layers);
    for (std::size_t index : batches.next()) {
      const LabeledExample& example = shard.examples[index];
      add_grads(batch_grad,
                backward(model.layers, example.features,
                         LossSpec::cross_entropy_of(
                             static_cast<std::size_t>(example.label))));
    }
    // w <- w - (eta / b) * sum of per-example gradients
    sgd_step(model.layers, batch_grad,
             cfg.learning_rate / static_cast<double>(cfg.batch_size));
  }
  for (const DenseLayer& layer : model.layers) {
    if (!layer.weights.all_finite() || !layer.bias.all_finite()) {
      throw StateError("local_train: parameters diverged to non-finite values");
    }
  }
  return model;
}

EvalResult evaluate(const Model& model,
                    std::span<const LabeledExample> dataset) {
  if (dataset.empty()) throw ArgumentError("evaluate: empty dataset");
  std::size_t correct = 0;
  double loss_total = 0.0;
  for (const LabeledExample& example : dataset) {
    const Tensor probabilities = model.predict(example.features);
    std::size_t argmax = 0;
    for (std::size_t i = 1; i < probabilities.numel(); ++i) {
      if (probabilities.data[i] > probabilities.data[argmax]) argmax = i;
    }
    if (static_cast<int>(argmax) == example.label) ++correct;
    loss_total += cross_entropy(probabilities,
                                static_cast<std::size_t>(example.label));
  }
  return {static_cast<double>(correct) / static_cast<double>(dataset.size()),
          loss_total / static_cast<double>(dataset.size())};
}

}  // namespace fedet

#include "fedet/ensemble.hpp"

#include <algorithm>
#include <cmath>

#include "fedet/errors.hpp"
#include "fedet/parallel.hpp"

namespace fedet {

namespace {

constexpr double kVarianceFloor = 1e-15;
constexpr double kWeightSumTolerance = 1e-9;

}  // namespace

double logit_variance(const Tensor& simplex) {
  const std::size_t n = simplex.numel();
  if (n == 0) throw ArgumentError("logit_variance: empty simplex");
  const double mean = 1.0 / static_cast<double>(n);
  double accum = 0.0;
  for (double s : simplex.data) {
    const double centered = s - mean;
    accum += centered * centered;
  }
  return accum / static_cast<double>(n);
}

std::map<int, double> consensus_weights(const LogitBundle& bundle) {
  if (bundle.empty()) throw ArgumentError("consensus_weights: empty bundle");
  std::map<int, double> weights;
  double total = 0.0;
  for (const auto& [client_id, simplex] : bundle) {
    const double variance = logit_variance(simplex);
    weights[client_id] = variance;
    total += variance;
  }
  if (total < kVarianceFloor) {
    // Every client is maximally unconfident; treat them as equals.
    const double uniform = 1.0 / static_cast<double>(bundle.size());
    for (auto& [client_id, weight] : weights) weight = uniform;
    return weights;
  }
  for (auto& [client_id, weight] : weights) weight /= total;
  return weights;
}

Tensor weighted_consensus(const LogitBundle& bundle,
                          const std::map<int, double>& weights) {
  if (bundle.empty()) throw ArgumentError("weighted_consensus: empty bundle");
  double weight_sum = 0.0;
  for (const auto& [client_id, weight] : weights) weight_sum += weight;
  if (std::fabs(weight_sum - 1.0) > kWeightSumTolerance) {
    throw ArgumentError("weighted_consensus: weights must sum to 1");
  }
  const std::size_t n = bundle.begin()->second.numel();
  Tensor out = Tensor::zeros({n});
  for (const auto& [client_id, simplex] : bundle) {
    if (simplex.numel() != n) {
      throw DimensionError("weighted_consensus: simplex length mismatch");
    }
    const double weight = weights.at(client_id);
    for (std::size_t i = 0; i < n; ++i) {
      out.data[i] += weight * simplex.data[i];
    }
  }
  return out;
}

std::size_t consensus_label(const Tensor& consensus) {
  if (consensus.numel() == 0) throw ArgumentError("consensus_label: empty");
  std::size_t argmax = 0;
  for (std::size_t i = 1; i < consensus.numel(); ++i) {
    if (consensus.data[i] > consensus.data[argmax]) argmax = i;
  }
  return argmax;
}

std::set<int> diversity_set(const LogitBundle& bundle, std::size_t label) {
  std::set<int> out;
  for (const auto& [client_id, simplex] : bundle) {
    if (consensus_label(simplex) != label) out.insert(client_id);
  }
  return out;
}

std::optional<Tensor> diversity_target(const LogitBundle& bundle,
                                       const std::set<int>& diversity,
                                       const std::map<int, double>& weights,
                                       bool renormalize) {
  if (diversity.empty()) return std::nullopt;
  const std::size_t n = bundle.begin()->second.numel();
  Tensor raw = Tensor::zeros({n});
  for (int client_id : diversity) {
    const Tensor& simplex = bundle.at(client_id);
    const double weight = weights.at(client_id);
    for (std::size_t i = 0; i < n; ++i) {
      raw.data[i] += weight * simplex.data[i];
    }
  }
  if (!renormalize) return raw;
  double total = 0.0;
  for (double v : raw.data) total += v;
  // A diversity set whose members all carry zero weight has nothing to
  // contribute; treat the target as absent.
  if (total < kVarianceFloor) return std::nullopt;
  for (auto& v : raw.data) v /= total;
  return raw;
}

ConsensusResult consensus_for_sample(const LogitBundle& bundle,
                                     bool renormalize_diversity) {
  ConsensusResult result;
  result.weights = consensus_weights(bundle);
  result.consensus = weighted_consensus(bundle, result.weights);
  result.label = consensus_label(result.consensus);
  result.diversity_set = diversity_set(bundle, result.label);
  result.diversity_target = diversity_target(
      bundle, result.diversity_set, result.weights, renormalize_diversity);
  return result;
}

std::vector<SampleTargets> compute_round_targets(
    const std::map<int, const Model*>& client_models,
    const PublicSet& public_set, bool renormalize_diversity, int workers) {
  if (client_models.empty()) {
    throw ArgumentError("compute_round_targets: no client models");
  }
  std::vector<SampleTargets> targets(public_set.inputs.size());
  parallel_for(
      public_set.inputs.size(),
      workers < 1 ? 1 : static_cast<std::size_t>(workers),
      [&](std::size_t index) {
        LogitBundle bundle;
        for (const auto& [client_id, model] : client_models) {
          bundle.emplace(client_id, model->predict(public_set.inputs[index]));
        }
        ConsensusResult consensus =
            consensus_for_sample(bundle, renormalize_diversity);
        targets[index] = {consensus.label,
                          std::move(consensus.diversity_target)};
      });
  return targets;
}

double ensemble_loss(const Model& server, std::span<const Tensor> inputs,
                     std::span<const SampleTargets> targets, double lambda) {
  if (inputs.size() != targets.size()) {
    throw DimensionError("ensemble_loss: inputs/targets length mismatch");
  }
  if (lambda < 0.0) throw ArgumentError("ensemble_loss: lambda < 0");
  if (inputs.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor probabilities = server.predict(inputs[i]);
    total += cross_entropy(probabilities, targets[i].label);
    if (targets[i].diversity_target) {
      total +=
          lambda * kl_divergence(*targets[i].diversity_target, probabilities);
    }
  }
  return total / static_cast<double>(inputs.size());
}

void server_update(Model& server, const PublicSet& public_set,
                   std::span<const SampleTargets> targets,
                   std::size_t iterations, std::size_t batch_size, double eta,
                   double lambda, Rng rng) {
  if (public_set.inputs.size() != targets.size()) {
    throw DimensionError("server_update: targets do not cover public set");
  }
  if (batch_size < 1 || batch_size > public_set.inputs.size()) {
    throw ConfigError("server_update: batch size must be in [1, |P|]");
  }
  for (std::size_t step = 0; step < iterations; ++step) {
    LossGrad batch_grad = zero_grads_like(server.layers);
    // Without replacement within the step.
    for (std::size_t index :
         rng.sample_without_replacement(public_set.inputs.size(), batch_size)) {
      LossSpec spec = LossSpec::cross_entropy_of(targets[index].label);
      if (targets[index].diversity_target) {
        spec.lambda = lambda;
        spec.kl_target = *targets[index].diversity_target;
      }
      add_grads(batch_grad,
                backward(server.layers, public_set.inputs[index], spec));
    }
    sgd_step(server.layers, batch_grad,
             eta / static_cast<double>(batch_size));
  }
  for (const DenseLayer& layer : server.layers) {
    if (!layer.weights.all_finite() || !layer.bias.all_finite()) {
      throw StateError("server_update: parameters diverged to non-finite values");
    }
  }
}

void aggregate_same_arch(
    ModelRegistry& registry,
    const std::map<int, std::vector<const Model*>>& received_by_id) {
  for (auto& [model_id, model] : registry.small_models) {
    auto group = received_by_id.find(model_id);
    if (group == received_by_id.end() || group->second.empty()) {
      continue;  // nothing received for this architecture; carry forward
    }
    const std::vector<const Model*>& members = group->second;
    for (const Model* member : members) {
      if (member->layers.size() != model.layers.size()) {
        throw DimensionError("aggregate: layer count mismatch in group");
      }
    }
    const double inverse = 1.0 / static_cast<double>(members.size());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      DenseLayer& layer = model.layers[l];
      for (const Model* member : members) {
        if (!member->layers[l].weights.same_shape(layer.weights) ||
            !member->layers[l].bias.same_shape(layer.bias)) {
          throw DimensionError("aggregate: shape mismatch in group");
        }
      }
      for (std::size_t i = 0; i < layer.weights.data.size(); ++i) {
        double sum = 0.0;
        for (const Model* member : members) {
          sum += member->layers[l].weights.data[i];
        }
        layer.weights.data[i] = sum * inverse;
      }
      for (std::size_t i = 0; i < layer.bias.data.size(); ++i) {
        double sum = 0.0;
        for (const Model* member : members) {
          sum += member->layers[l].bias.data[i];
        }
        layer.bias.data[i] = sum * inverse;
      }
    }
  }
}

Head average_client_heads(std::span<const Model* const> received) {
  if (received.empty()) throw ArgumentError("average_client_heads: no models");
  Head accum = received.front()->head();
  auto zero = [](Tensor& t) { std::fill(t.data.begin(), t.data.end(), 0.0); };
  zero(accum.hidden.weights);
  zero(accum.hidden.bias);
  zero(accum.output.weights);
  zero(accum.output.bias);
  for (const Model* model : received) {
    const Head head = model->head();
    if (!head.hidden.weights.same_shape(accum.hidden.weights) ||
        !head.output.weights.same_shape(accum.output.weights)) {
      throw DimensionError("average_client_heads: head shape mismatch");
    }
    for (std::size_t i = 0; i < accum.hidden.weights.data.size(); ++i) {
      accum.hidden.weights.data[i] += head.hidden.weights.data[i];
    }
    for (std::size_t i = 0; i < accum.hidden.bias.data.size(); ++i) {
      accum.hidden.bias.data[i] += head.hidden.bias.data[i];
    }
    for (std::size_t i = 0; i < accum.output.weights.data.size(); ++i) {
      accum.output.weights.data[i] += head.output.weights.data[i];
    }
    for (std::size_t i = 0; i < accum.output.bias.data.size(); ++i) {
      accum.output.bias.data[i] += head.output.bias.data[i];
    }
  }
  const double inverse = 1.0 / static_cast<double>(received.size());
  for (auto* tensor : {&accum.hidden.weights, &accum.hidden.bias,
                       &accum.output.weights, &accum.output.bias}) {
    for (auto& v : tensor->data) v *= inverse;
  }
  return accum;
}

void broadcast_server_head(ModelRegistry& registry) {
  const Head head = registry.server_model.head();
  for (auto& [model_id, model] : registry.small_models) {
    model.set_head(head);
  }
}

}  // namespace fedet

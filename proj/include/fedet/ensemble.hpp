#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "fedet/client.hpp"
#include "fedet/data.hpp"
#include "fedet/model.hpp"

namespace fedet {

/// Per-client simplex outputs for one public input.
using LogitBundle = std::map<int, Tensor>;

/// Everything the consensus step derives from one bundle.
struct ConsensusResult {
  std::map<int, double> weights;
  Tensor consensus;
  std::size_t label = 0;
  std::set<int> diversity_set;
  std::optional<Tensor> diversity_target;
};

/// Population variance of the simplex components: (1/N) sum (s_i - 1/N)^2.
/// High variance marks a confident (peaked) output.
double logit_variance(const Tensor& simplex);

/// Variance-ratio confidence weights; falls back to uniform weights when
/// every client's variance is ~0 (all-uniform outputs).
std::map<int, double> consensus_weights(const LogitBundle& bundle);

/// Convex combination of the bundle under the given weights.
Tensor weighted_consensus(const LogitBundle& bundle,
                          const std::map<int, double>& weights);

/// Argmax with ties broken toward the lowest index.
std::size_t consensus_label(const Tensor& consensus);

/// Clients whose own argmax (same tie rule) disagrees with the consensus.
std::set<int> diversity_set(const LogitBundle& bundle, std::size_t label);

/// Weighted combination of the disagreeing clients' outputs, using weights
/// normalized over the WHOLE bundle. When `renormalize` the raw vector is
/// rescaled to sum 1 so it can serve as a KL target; absent when the
/// diversity set is empty (or carries zero total weight under renormalize).
std::optional<Tensor> diversity_target(const LogitBundle& bundle,
                                       const std::set<int>& diversity,
                                       const std::map<int, double>& weights,
                                       bool renormalize = true);

/// Full consensus pipeline for one bundle.
ConsensusResult consensus_for_sample(const LogitBundle& bundle,
                                     bool renormalize_diversity = true);

/// Frozen per-sample training targets for one server round.
struct SampleTargets {
  std::size_t label = 0;
  std::optional<Tensor> diversity_target;
};

/// Consensus targets over the whole public set from the received (frozen)
/// client models, keyed by client id. Pure per sample; `workers` only
/// changes scheduling, never the result.
std::vector<SampleTargets> compute_round_targets(
    const std::map<int, const Model*>& client_models,
    const PublicSet& public_set, bool renormalize_diversity = true,
    int workers = 1);

/// Mean over the zipped (inputs, targets) of
///   cross_entropy(server(x), y_s(x)) + lambda * KL(s_div(x), server(x))
/// with the KL term omitted where the diversity target is absent.
double ensemble_loss(const Model& server, std::span<const Tensor> inputs,
                     std::span<const SampleTargets> targets, double lambda);

/// `iterations` SGD steps on the frozen targets; each step samples
/// batch_size public inputs without replacement within the step.
void server_update(Model& server, const PublicSet& public_set,
                   std::span<const SampleTargets> targets,
                   std::size_t iterations, std::size_t batch_size, double eta,
                   double lambda, Rng rng);

/// Parameter-wise mean per model id (ascending client order within a
/// group); ids with no received models keep their previous parameters.
void aggregate_same_arch(
    ModelRegistry& registry,
    const std::map<int, std::vector<const Model*>>& received_by_id);

/// Parameter-wise mean of the received clients' heads.
Head average_client_heads(std::span<const Model* const> received);

/// Installs an exact copy of the server's head into every small model.
void broadcast_server_head(ModelRegistry& registry);

}  // namespace fedet

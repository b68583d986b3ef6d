#pragma once

#include <span>
#include <string>
#include <vector>

#include "fedet/data.hpp"
#include "fedet/model.hpp"

namespace fedet {

struct ClientBoundTerms {
  int client_id = 0;
  double weight = 0.0;
  double empirical_loss = 0.0;  // 0-1 error of the client's model on its shard
  std::size_t shard_size = 0;
  double discrepancy = 0.0;     // label-marginal L1 proxy
  double lemma_small_sample = 0.0;  // per-client sqrt(log(2/delta) / (2|B|))
};

/// Computable terms of the ensemble generalization bound. The discrepancy
/// column is a label-marginal proxy and nu is a configured constant, so the
/// report prints both sides without asserting the inequality.
struct BoundReport {
  std::vector<ClientBoundTerms> per_client;
  double term1 = 0.0;      // sum alpha_i * empirical loss
  double term2 = 0.0;      // sqrt(log(1/delta)) * sum alpha_i / sqrt(|B_i|)
  double term2_lemma = 0.0;  // sum alpha_i * sqrt(log(2/delta) / (2|B_i|))
  double term3 = 0.0;      // (1/2) sum alpha_i * discrepancy_i
  double nu_term = 0.0;    // sum alpha_i * nu_i, nu configured
  bool nu_estimated = false;  // always false: nu is a constant, not estimated
  double total = 0.0;      // term1 + term2 + term3 + nu_term
  double measured_lhs = 0.0;  // 0-1 loss of the weighted ensemble on the test set
  double delta = 0.0;
};

/// sum_i alpha_i * (0-1 error of model i on its own shard).
double empirical_loss_term(std::span<const Model* const> client_models,
                           std::span<const ClientShard> shards,
                           std::span<const double> weights);

/// sqrt(log(1/delta)) * sum_i alpha_i / sqrt(size_i).
double hoeffding_term(std::span<const std::size_t> shard_sizes,
                      std::span<const double> weights, double delta);

/// L1 distance between two label marginals; range [0, 2].
double discrepancy_proxy(std::span<const double> shard_marginal,
                         std::span<const double> target_marginal);

/// Empirical label distribution over n_classes.
std::vector<double> label_marginal(std::span<const LabeledExample> examples,
                                   std::size_t n_classes);

BoundReport bound_report(const ModelRegistry& registry,
                         std::span<const ClientShard> shards,
                         std::span<const LabeledExample> test_set,
                         std::span<const double> weights, double delta,
                         std::span<const double> nu_constants);

void write_bound_report_csv(const BoundReport& report, const std::string& path);
void write_bound_report_text(const BoundReport& report, const std::string& path);
std::string bound_report_text(const BoundReport& report);

}  // namespace fedet

#include "fedet/bounds.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fedet/errors.hpp"

namespace fedet {

namespace {

std::size_t argmax_lowest(const Tensor& simplex) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < simplex.numel(); ++i) {
    if (simplex.data[i] > simplex.data[best]) best = i;
  }
  return best;
}

double zero_one_error(const Model& model,
                      std::span<const LabeledExample> examples) {
  if (examples.empty()) throw ArgumentError("zero_one_error: empty dataset");
  std::size_t wrong = 0;
  for (const LabeledExample& example : examples) {
    if (static_cast<int>(argmax_lowest(model.predict(example.features))) !=
        example.label) {
      ++wrong;
    }
  }
  return static_cast<double>(wrong) / static_cast<double>(examples.size());
}

void check_weights(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ArgumentError("weights must be nonnegative");
    total += w;
  }
  if (std::fabs(total - 1.0) > 1e-9) {
    throw ArgumentError("weights must sum to 1");
  }
}

std::string fmt(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.12g", v);
  return buffer;
}

}  // namespace

double empirical_loss_term(std::span<const Model* const> client_models,
                           std::span<const ClientShard> shards,
                           std::span<const double> weights) {
  if (client_models.size() != shards.size() ||
      client_models.size() != weights.size()) {
    throw DimensionError("empirical_loss_term: length mismatch");
  }
  check_weights(weights);
  double total = 0.0;
  for (std::size_t i = 0; i < client_models.size(); ++i) {
    if (shards[i].examples.empty()) {
      throw ArgumentError("empirical_loss_term: empty shard");
    }
    total += weights[i] * zero_one_error(*client_models[i], shards[i].examples);
  }
  return total;
}

double hoeffding_term(std::span<const std::size_t> shard_sizes,
                      std::span<const double> weights, double delta) {
  if (shard_sizes.size() != weights.size()) {
    throw DimensionError("hoeffding_term: length mismatch");
  }
  if (delta <= 0.0 || delta >= 1.0) {
    throw ArgumentError("hoeffding_term: delta must be in (0, 1)");
  }
  double weighted = 0.0;
  for (std::size_t i = 0; i < shard_sizes.size(); ++i) {
    if (shard_sizes[i] == 0) throw ArgumentError("hoeffding_term: zero size");
    weighted += weights[i] / std::sqrt(static_cast<double>(shard_sizes[i]));
  }
  return std::sqrt(std::log(1.0 / delta)) * weighted;
}

double discrepancy_proxy(std::span<const double> shard_marginal,
                         std::span<const double> target_marginal) {
  if (shard_marginal.size() != target_marginal.size()) {
    throw DimensionError("discrepancy_proxy: length mismatch");
  }
  double l1 = 0.0;
  for (std::size_t i = 0; i < shard_marginal.size(); ++i) {
    l1 += std::fabs(shard_marginal[i] - target_marginal[i]);
  }
  return l1;
}

std::vector<double> label_marginal(std::span<const LabeledExample> examples,
                                   std::size_t n_classes) {
  if (examples.empty()) throw ArgumentError("label_marginal: empty dataset");
  std::vector<double> marginal(n_classes, 0.0);
  for (const LabeledExample& example : examples) {
    if (example.label < 0 ||
        static_cast<std::size_t>(example.label) >= n_classes) {
      throw ArgumentError("label_marginal: label out of range");
    }
    marginal[static_cast<std::size_t>(example.label)] += 1.0;
  }
  for (auto& v : marginal) v /= static_cast<double>(examples.size());
  return marginal;
}

BoundReport bound_report(const ModelRegistry& registry,
                         std::span<const ClientShard> shards,
                         std::span<const LabeledExample> test_set,
                         std::span<const double> weights, double delta,
                         std::span<const double> nu_constants) {
  if (shards.size() != weights.size()) {
    throw DimensionError("bound_report: shards/weights length mismatch");
  }
  if (!nu_constants.empty() && nu_constants.size() != shards.size()) {
    throw DimensionError("bound_report: nu length mismatch");
  }
  if (delta <= 0.0 || delta >= 1.0) {
    throw ArgumentError("bound_report: delta must be in (0, 1)");
  }
  if (test_set.empty()) throw ArgumentError("bound_report: empty test set");
  check_weights(weights);

  const std::size_t n_classes = registry.server_model.n_classes();
  const std::vector<double> target_marginal =
      label_marginal(test_set, n_classes);

  BoundReport report;
  report.delta = delta;
  const double log_inv_delta = std::log(1.0 / delta);
  const double log_two_delta = std::log(2.0 / delta);

  std::vector<const Model*> client_models(shards.size());
  for (std::size_t i = 0; i < shards.size(); ++i) {
    const ClientShard& shard = shards[i];
    const int model_id = registry.assignment.at(shard.client_id);
    const Model& model = registry.small_models.at(model_id);
    client_models[i] = &model;

    ClientBoundTerms terms;
    terms.client_id = shard.client_id;
    terms.weight = weights[i];
    terms.shard_size = shard.examples.size();
    terms.empirical_loss = zero_one_error(model, shard.examples);
    terms.discrepancy = discrepancy_proxy(
        label_marginal(shard.examples, n_classes), target_marginal);
    terms.lemma_small_sample = std::sqrt(
        log_two_delta / (2.0 * static_cast<double>(terms.shard_size)));
    report.per_client.push_back(terms);

    report.term1 += weights[i] * terms.empirical_loss;
    report.term2 += weights[i] / std::sqrt(static_cast<double>(terms.shard_size));
    report.term2_lemma += weights[i] * terms.lemma_small_sample;
    report.term3 += 0.5 * weights[i] * terms.discrepancy;
    report.nu_term += weights[i] * (nu_constants.empty() ? 0.0 : nu_constants[i]);
  }
  report.term2 *= std::sqrt(log_inv_delta);
  report.total = report.term1 + report.term2 + report.term3 + report.nu_term;

  // Measured left-hand side: 0-1 loss of the weight-averaged ensemble
  // prediction on the test set.
  std::size_t wrong = 0;
  for (const LabeledExample& example : test_set) {
    Tensor mix;
    for (std::size_t i = 0; i < client_models.size(); ++i) {
      const Tensor probabilities = client_models[i]->predict(example.features);
      if (mix.numel() == 0) mix = Tensor::zeros({probabilities.numel()});
      for (std::size_t j = 0; j < probabilities.numel(); ++j) {
        mix.data[j] += weights[i] * probabilities.data[j];
      }
    }
    if (static_cast<int>(argmax_lowest(mix)) != example.label) ++wrong;
  }
  report.measured_lhs =
      static_cast<double>(wrong) / static_cast<double>(test_set.size());
  return report;
}

void write_bound_report_csv(const BoundReport& report,
                            const std::string& path) {
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw IoError("cannot open for writing: " + path);
  file << "client_id,weight,empirical_loss_01,shard_size,discrepancy_l1,"
          "lemma_small_sample\n";
  for (const auto& terms : report.per_client) {
    file << terms.client_id << ',' << fmt(terms.weight) << ','
         << fmt(terms.empirical_loss) << ',' << terms.shard_size << ','
         << fmt(terms.discrepancy) << ',' << fmt(terms.lemma_small_sample)
         << "\n";
  }
  if (!file) throw IoError("write failed: " + path);
}

std::string bound_report_text(const BoundReport& report) {
  std::ostringstream out;
  out << "Ensemble generalization diagnostics (delta = " << fmt(report.delta)
      << ")\n"
      << "  term1  weighted empirical 0-1 loss        = " << fmt(report.term1)
      << "\n"
      << "  term2  sqrt(log(1/delta)) small-sample    = " << fmt(report.term2)
      << "\n"
      << "         per-client lemma form (comparison) = "
      << fmt(report.term2_lemma) << "\n"
      << "  term3  (1/2) weighted label-marginal L1   = " << fmt(report.term3)
      << "  [proxy for the distribution discrepancy]\n"
      << "  nu     weighted configured constants      = " << fmt(report.nu_term)
      << "  [not estimated]\n"
      << "  total  term1 + term2 + term3 + nu         = " << fmt(report.total)
      << "\n"
      << "  measured ensemble 0-1 loss on test set    = "
      << fmt(report.measured_lhs) << "\n"
      << "The discrepancy column is a label-marginal proxy and nu is a "
         "configured constant, so total is a diagnostic, not a certified "
         "upper bound.\n";
  return out.str();
}

void write_bound_report_text(const BoundReport& report,
                             const std::string& path) {
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw IoError("cannot open for writing: " + path);
  file << bound_report_text(report);
  if (!file) throw IoError("write failed: " + path);
}

}  // namespace fedet

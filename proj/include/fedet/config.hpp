#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedet/model.hpp"

namespace fedet {

/// One experiment manifest. Parsed from a flat `key = value` file; every
/// field name below is a config key. Unknown keys are rejected.
struct RunConfig {
  // Federation shape
  std::size_t K = 20;   // total clients
  std::size_t m = 5;    // sampled clients per round
  std::size_t U = 3;    // distinct small-model architectures
  std::size_t N = 4;    // classes
  std::size_t d = 8;    // input dimension
  std::size_t u = 16;   // shared representation width
  std::size_t T = 60;   // communication rounds

  // Data heterogeneity and local training
  double alpha = 0.1;
  std::size_t tau = 30;
  std::size_t b = 32;
  double eta = 0.05;

  // Server distillation
  std::size_t tau_s = 40;
  std::size_t b_s = 32;
  double eta_s = 0.01;
  double lambda = 0.05;

  std::uint64_t seed = 42;
  std::string algorithm = "fed-et";  // or "fedavg"

  // Architectures: per-model hidden widths, models separated by '|',
  // layers within a model by ','. E.g. "8 | 16 | 32" and "64,64".
  std::string small_widths = "8 | 16 | 32";
  std::string server_widths = "64,64";

  // Synthetic data generation (used when the dataset paths are empty);
  // the default counts split each class 7:1:2.
  std::size_t train_per_class = 1050;
  std::size_t public_per_class = 150;
  std::size_t test_per_class = 300;
  double spread = 0.3;
  double noise_std = 0.1;

  // Dataset paths; when all three are set the CSVs are loaded instead of
  // generated.
  std::string train_path;
  std::string public_path;
  std::string test_path;

  // Output paths
  std::string metrics_path = "metrics.csv";
  std::string checkpoint_path = "checkpoint.txt";

  // Diversity-target mode: false = renormalized KL target (default),
  // true = the raw sub-simplex combination, kept for comparison.
  bool raw_diversity_target = false;

  std::size_t workers = 1;

  std::vector<BackboneSpec> small_specs() const;
  BackboneSpec server_spec() const;
  bool has_dataset_paths() const;
};

RunConfig parse_config_file(const std::string& path);

/// Applies one `key = value` assignment (also used for flag overrides).
void apply_config_entry(RunConfig& config, const std::string& key,
                        const std::string& value, const std::string& context);

/// Throws ConfigError on any invariant violation (m > K, zero counts, ...).
void validate(const RunConfig& config);

std::vector<std::size_t> parse_width_list(const std::string& text,
                                          const std::string& context);

}  // namespace fedet

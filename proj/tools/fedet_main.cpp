// Command-line front end for the federated ensemble-transfer simulator.
// Every subcommand is a thin adapter over the library; all randomness
// flows from the single `seed` config key.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedet/bounds.hpp"
#include "fedet/checkpoint.hpp"
#include "fedet/client.hpp"
#include "fedet/config.hpp"
#include "fedet/errors.hpp"
#include "fedet/orchestrator.hpp"

namespace {

namespace fs = std::filesystem;

struct CommonFlags {
  std::string config_path;
  std::optional<std::string> algorithm;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;
};

fedet::RunConfig load_config(const CommonFlags& flags) {
  fedet::RunConfig config = flags.config_path.empty()
                                ? fedet::RunConfig{}
                                : fedet::parse_config_file(flags.config_path);
  if (flags.algorithm) {
    fedet::apply_config_entry(config, "algorithm", *flags.algorithm, "--algorithm");
  }
  if (flags.seed) config.seed = *flags.seed;
  if (flags.workers) {
    if (*flags.workers < 1) throw fedet::ConfigError("--workers must be >= 1");
    config.workers = *flags.workers;
  }
  return config;
}

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required) {
  auto* config_opt =
      cmd->add_option("--config", flags.config_path, "Experiment config file");
  if (config_required) config_opt->required();
  cmd->add_option("--seed", flags.seed, "Override the config seed");
  cmd->add_option("--workers", flags.workers,
                  "Worker threads (never affects results)");
}

int cmd_gen_data(const CommonFlags& flags) {
  fedet::RunConfig config = load_config(flags);
  fedet::validate(config);
  const fs::path dir = flags.out.value_or(".");
  fs::create_directories(dir);
  const fedet::DataSplits splits = fedet::synthesize_splits(config);
  fedet::save_csv(splits.train, (dir / "train.csv").string());
  fedet::save_csv(splits.public_set, (dir / "public.csv").string());
  fedet::save_csv(splits.test, (dir / "test.csv").string());
  std::cout << "wrote " << splits.train.size() << " train / "
            << splits.public_set.inputs.size() << " public / "
            << splits.test.size() << " test rows under " << dir.string()
            << "\n";
  return 0;
}

int cmd_partition(const CommonFlags& flags) {
  fedet::RunConfig config = load_config(flags);
  fedet::validate(config);
  const fs::path dir = flags.out.value_or(".");
  fs::create_directories(dir);
  const std::vector<fedet::LabeledExample> train =
      config.train_path.empty() ? fedet::synthesize_splits(config).train
                                : fedet::load_csv(config.train_path);
  fedet::PartitionSpec spec;
  spec.client_count = config.K;
  spec.alpha = config.alpha;
  spec.seed = config.seed;
  const auto shards = fedet::dirichlet_partition(train, spec);
  for (const auto& shard : shards) {
    std::ostringstream name;
    name << "shard_" << shard.client_id << ".csv";
    fedet::save_csv(shard.examples, (dir / name.str()).string());
  }
  std::cout << "wrote " << shards.size() << " shard files under "
            << dir.string() << "\n";
  return 0;
}

int cmd_train(const CommonFlags& flags) {
  fedet::RunConfig config = load_config(flags);
  if (flags.out) config.metrics_path = *flags.out;
  fedet::run_training(config, &std::cout);
  std::cout << "metrics: " << config.metrics_path
            << "\ncheckpoint: " << config.checkpoint_path << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_path,
             int model_id) {
  const fedet::ModelRegistry registry = fedet::checkpoint_load(checkpoint_path);
  const std::vector<fedet::LabeledExample> dataset = fedet::load_csv(data_path);
  const fedet::Model& model = model_id == 0
                                  ? registry.server_model
                                  : registry.small_models.at(model_id);
  const fedet::EvalResult result = fedet::evaluate(model, dataset);
  std::cout << "accuracy " << result.accuracy << "\nmean_loss "
            << result.mean_loss << "\n";
  return 0;
}

int cmd_bound_report(const CommonFlags& flags,
                     const std::string& checkpoint_path, double delta,
                     double nu) {
  fedet::RunConfig config = load_config(flags);
  fedet::validate(config);
  const fedet::FedData data = fedet::prepare_data(config);
  const fedet::ModelRegistry registry =
      checkpoint_path.empty()
          ? fedet::init_state(config, data).registry
          : fedet::checkpoint_load(checkpoint_path);

  // Weights proportional to shard size, mirroring the sampling scheme.
  std::vector<double> weights;
  double total = 0.0;
  for (const auto& shard : data.shards) {
    total += static_cast<double>(shard.examples.size());
  }
  for (const auto& shard : data.shards) {
    weights.push_back(static_cast<double>(shard.examples.size()) / total);
  }
  const std::vector<double> nu_constants(data.shards.size(), nu);
  const fedet::BoundReport report =
      fedet::bound_report(registry, data.shards, data.test, weights, delta,
                          nu_constants);
  const std::string base = flags.out.value_or("bound_report");
  fedet::write_bound_report_csv(report, base + ".csv");
  fedet::write_bound_report_text(report, base + ".txt");
  std::cout << fedet::bound_report_text(report);
  return 0;
}

int cmd_sweep_lambda(const CommonFlags& flags, const std::string& values) {
  fedet::RunConfig base = load_config(flags);
  fedet::validate(base);
  const fs::path dir = flags.out.value_or("sweep");
  fs::create_directories(dir);

  std::vector<std::string> tokens;
  {
    std::stringstream stream(values);
    std::string token;
    while (std::getline(stream, token, ',')) {
      if (!token.empty()) tokens.push_back(token);
    }
  }
  if (tokens.empty()) throw fedet::ConfigError("--values is empty");

  const fedet::FedData data = fedet::prepare_data(base);
  std::ofstream comparison(dir / "sweep_comparison.csv", std::ios::trunc);
  if (!comparison) throw fedet::IoError("cannot open sweep comparison CSV");
  comparison << "lambda,final_server_test_acc,best_server_test_acc,"
                "final_server_test_loss,comm_params_cumulative,metrics_path\n";
  for (const std::string& token : tokens) {
    fedet::RunConfig config = base;
    fedet::apply_config_entry(config, "lambda", token, "--values");
    config.metrics_path = (dir / ("metrics_lambda_" + token + ".csv")).string();
    config.checkpoint_path =
        (dir / ("checkpoint_lambda_" + token + ".txt")).string();
    std::cout << "lambda = " << token << "\n";
    const fedet::RunResult result = fedet::run_training(config, data, &std::cout);
    double final_acc = 0.0, best_acc = 0.0, final_loss = 0.0;
    std::uint64_t comm = 0;
    for (const auto& report : result.reports) {
      best_acc = std::max(best_acc, report.server_test_acc);
      final_acc = report.server_test_acc;
      final_loss = report.server_test_loss;
      comm = report.comm_params_cumulative;
    }
    comparison << token << ',' << final_acc << ',' << best_acc << ','
               << final_loss << ',' << comm << ',' << config.metrics_path
               << "\n";
    comparison.flush();
  }
  std::cout << "comparison: " << (dir / "sweep_comparison.csv").string()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated ensemble-transfer simulator"};
  app.require_subcommand(1);

  CommonFlags gen_flags;
  auto* gen = app.add_subcommand("gen-data",
                                 "Write train/public/test CSV splits");
  add_common(gen, gen_flags, true);
  gen->add_option("--out", gen_flags.out, "Output directory");

  CommonFlags part_flags;
  auto* part = app.add_subcommand("partition",
                                  "Write per-client shard CSVs");
  add_common(part, part_flags, true);
  part->add_option("--out", part_flags.out, "Output directory");

  CommonFlags train_flags;
  auto* train = app.add_subcommand("train", "Run federated training");
  add_common(train, train_flags, true);
  train->add_option("--algorithm", train_flags.algorithm,
                    "fed-et or fedavg (overrides config)");
  train->add_option("--out", train_flags.out, "Metrics CSV path override");

  std::string eval_checkpoint, eval_data;
  int eval_model_id = 0;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpointed model");
  eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")
      ->required();
  eval->add_option("--data", eval_data, "Labeled CSV to evaluate on")
      ->required();
  eval->add_option("--model", eval_model_id,
                   "Small-model id (default: the server model)");

  CommonFlags bound_flags;
  std::string bound_checkpoint;
  double bound_delta = 0.1;
  double bound_nu = 0.0;
  auto* bound = app.add_subcommand("bound-report",
                                   "Generalization-bound diagnostics");
  add_common(bound, bound_flags, true);
  bound->add_option("--checkpoint", bound_checkpoint,
                    "Checkpoint file (default: freshly initialized models)");
  bound->add_option("--delta", bound_delta, "Confidence parameter in (0,1)");
  bound->add_option("--nu", bound_nu, "Configured nu constant (not estimated)");
  bound->add_option("--out", bound_flags.out, "Report base path");

  CommonFlags sweep_flags;
  std::string sweep_values = "0,0.05,0.5";
  auto* sweep = app.add_subcommand("sweep-lambda",
                                   "Train once per diversity weight");
  add_common(sweep, sweep_flags, true);
  sweep->add_option("--values", sweep_values, "Comma-separated lambda grid");
  sweep->add_option("--out", sweep_flags.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_flags);
    if (part->parsed()) return cmd_partition(part_flags);
    if (train->parsed()) return cmd_train(train_flags);
    if (eval->parsed()) {
      return cmd_eval(eval_checkpoint, eval_data, eval_model_id);
    }
    if (bound->parsed()) {
      return cmd_bound_report(bound_flags, bound_checkpoint, bound_delta,
                              bound_nu);
    }
    if (sweep->parsed()) return cmd_sweep_lambda(sweep_flags, sweep_values);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cerr << "error: no command\n";
  return 1;
}

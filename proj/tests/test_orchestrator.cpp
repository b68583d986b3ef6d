#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "fedet/checkpoint.hpp"
#include "fedet/errors.hpp"
#include "fedet/orchestrator.hpp"
#include "test_support.hpp"

using namespace fedet;

namespace {

// Small but non-trivial run used across the orchestrator tests.
RunConfig tiny_config(const test::TempDir& dir) {
  RunConfig config;
  config.K = 8;
  config.m = 3;
  config.U = 2;
  config.N = 4;
  config.d = 6;
  config.u = 8;
  config.T = 2;
  config.alpha = 0.5;
  config.tau = 20;
  config.b = 8;
  config.eta = 0.08;
  config.tau_s = 20;
  config.b_s = 16;
  config.eta_s = 0.03;
  config.lambda = 0.05;
  config.seed = 11;
  config.small_widths = "4 | 8";
  config.server_widths = "24,16";
  config.train_per_class = 150;
  config.public_per_class = 25;
  config.test_per_class = 40;
  config.metrics_path = dir.file("metrics.csv");
  config.checkpoint_path = dir.file("checkpoint.txt");
  return config;
}

std::string slurp(const std::string& path) {
  std::ifstream file(path);
  REQUIRE(file);
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return buffer.str();
}

bool registries_identical(const ModelRegistry& a, const ModelRegistry& b) {
  if (a.assignment != b.assignment) return false;
  if (a.small_models.size() != b.small_models.size()) return false;
  for (const auto& [id, model] : a.small_models) {
    if (!test::models_identical(model, b.small_models.at(id))) return false;
  }
  return test::models_identical(a.server_model, b.server_model);
}

}  // namespace

TEST_CASE("equal shard sizes sample clients uniformly") {
  const std::vector<std::size_t> sizes(10, 50);
  std::vector<std::size_t> counts(10, 0);
  Rng rng(3);
  const std::size_t trials = 10000;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    for (int id : sample_clients(sizes, 3, rng)) {
      ++counts[static_cast<std::size_t>(id)];
    }
  }
  const double expected = static_cast<double>(trials) * 3.0 / 10.0;
  for (std::size_t count : counts) {
    CHECK(std::fabs(static_cast<double>(count) - expected) <=
          0.05 * expected);
  }
}

TEST_CASE("sampling all clients returns everyone regardless of sizes") {
  const std::vector<std::size_t> sizes{1, 100, 7, 3000};
  Rng rng(5);
  const auto sampled = sample_clients(sizes, 4, rng);
  CHECK(sampled == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("a dominant client is selected almost always") {
  std::vector<std::size_t> sizes(10, 1);
  sizes[6] = 990;  // ~99% of the data
  Rng rng(7);
  std::size_t hits = 0;
  const std::size_t trials = 10000;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    if (sample_clients(sizes, 1, rng)[0] == 6) ++hits;
  }
  CHECK(std::fabs(static_cast<double>(hits) / trials - 0.99) <= 0.005);
}

TEST_CASE("sampling more clients than exist is a configuration error") {
  const std::vector<std::size_t> sizes{10, 10};
  Rng rng(9);
  CHECK_THROWS_AS(sample_clients(sizes, 3, rng), ConfigError);
}

TEST_CASE("zero learning rates leave parameters fixed but count traffic") {
  test::TempDir dir("fedet-orch");
  RunConfig config = tiny_config(dir);
  config.eta = 0.0;
  config.eta_s = 0.0;
  config.T = 1;
  const FedData data = prepare_data(config);
  TrainState state = init_state(config, data);
  const ModelRegistry before = state.registry;
  const RoundReport report = run_round(state, config, data, 0);
  CHECK(report.comm_params_round > 0);
  CHECK(report.comm_params_cumulative == report.comm_params_round);
  // Heads start broadcast-aligned, so the round reduces to averaging
  // identical parameters; only last-bit rounding from the k-way means can
  // remain.
  CHECK(state.registry.assignment == before.assignment);
  CHECK(test::max_param_delta(state.registry.server_model,
                              before.server_model) <= 1e-14);
  for (const auto& [id, model] : state.registry.small_models) {
    CHECK(test::max_param_delta(model, before.small_models.at(id)) <= 1e-14);
  }
}

TEST_CASE("rounds replay identically for a fixed seed") {
  test::TempDir dir("fedet-orch");
  const RunConfig config = tiny_config(dir);
  const FedData data = prepare_data(config);
  TrainState a = init_state(config, data);
  TrainState b = init_state(config, data);
  for (int t = 0; t < 2; ++t) {
    const RoundReport ra = run_round(a, config, data, t);
    const RoundReport rb = run_round(b, config, data, t);
    CHECK(ra.sampled_clients == rb.sampled_clients);
    CHECK(ra.server_test_acc == rb.server_test_acc);
    CHECK(ra.server_test_loss == rb.server_test_loss);
    CHECK(ra.mean_client_train_loss == rb.mean_client_train_loss);
    CHECK(ra.comm_params_round == rb.comm_params_round);
  }
  CHECK(registries_identical(a.registry, b.registry));
}

TEST_CASE("a failing round leaves the state untouched") {
  test::TempDir dir("fedet-orch");
  RunConfig config = tiny_config(dir);
  config.b_s = 100000;  // larger than the public set; the server phase throws
  const FedData data = prepare_data(config);
  TrainState state = init_state(config, data);
  const ModelRegistry before = state.registry;
  CHECK_THROWS_AS(run_round(state, config, data, 0), ConfigError);
  CHECK(registries_identical(state.registry, before));
  CHECK(state.comm_params_cumulative == 0);
}

TEST_CASE("rounds never mutate the dataset or the shards") {
  test::TempDir dir("fedet-orch");
  const RunConfig config = tiny_config(dir);
  const FedData data = prepare_data(config);
  auto checksum = [&]() {
    double total = 0.0;
    for (const auto& shard : data.shards) {
      total += static_cast<double>(shard.examples.size());
      for (const auto& example : shard.examples) {
        total += example.label;
        for (double v : example.features.data) total += v;
      }
    }
    for (const auto& input : data.public_set.inputs) {
      for (double v : input.data) total += v;
    }
    return total;
  };
  const double before = checksum();
  TrainState state = init_state(config, data);
  (void)run_round(state, config, data, 0);
  CHECK(checksum() == before);
}

TEST_CASE("per-round traffic is twice the sampled designated model sizes") {
  test::TempDir dir("fedet-orch");
  const RunConfig config = tiny_config(dir);
  const FedData data = prepare_data(config);
  TrainState state = init_state(config, data);
  const ModelRegistry& registry = state.registry;

  // Independent parameter-count oracle from the width strings.
  auto dense_params = [](std::size_t out, std::size_t in) {
    return out * in + out;
  };
  std::map<int, std::size_t> oracle;
  const auto specs = config.small_specs();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    std::size_t count = 0;
    std::size_t fan_in = config.d;
    for (std::size_t width : specs[i].hidden_widths) {
      count += dense_params(width, fan_in);
      fan_in = width;
    }
    count += dense_params(config.u, fan_in);
    count += dense_params(config.u, config.u);
    count += dense_params(config.N, config.u);
    oracle[static_cast<int>(i) + 1] = count;
  }

  const RoundReport report = run_round(state, config, data, 0);
  std::uint64_t expected = 0;
  for (int client : report.sampled_clients) {
    expected += 2 * oracle.at(registry.assignment.at(client));
  }
  CHECK(report.comm_params_round == expected);
}

TEST_CASE("run_training with zero rounds writes only the header") {
  test::TempDir dir("fedet-orch");
  RunConfig config = tiny_config(dir);
  config.T = 0;
  const RunResult result = run_training(config);
  CHECK(result.reports.empty());
  CHECK(slurp(config.metrics_path) == std::string(kMetricsHeader) + "\n");
  // Checkpoint of the initial registry still appears.
  const ModelRegistry loaded = checkpoint_load(config.checkpoint_path);
  CHECK(registries_identical(loaded, result.state.registry));
}

TEST_CASE("training twice yields byte-identical metrics") {
  test::TempDir dir("fedet-orch");
  RunConfig config = tiny_config(dir);
  (void)run_training(config);
  const std::string first = slurp(config.metrics_path);
  (void)run_training(config);
  CHECK(slurp(config.metrics_path) == first);

  RunConfig threaded = config;
  threaded.workers = 4;
  (void)run_training(threaded);
  CHECK(slurp(config.metrics_path) == first);
}

TEST_CASE("server accuracy improves over the first rounds") {
  test::TempDir dir("fedet-orch");
  RunConfig config = tiny_config(dir);
  config.T = 8;
  const RunResult result = run_training(config);
  REQUIRE(result.reports.size() == 8);
  CHECK(result.reports.back().server_test_acc >
        result.reports.front().server_test_acc - 1e-9);
  CHECK(result.reports.back().server_test_acc > 0.5);
  // Cumulative accounting is the exact running sum.
  std::uint64_t running = 0;
  for (const auto& report : result.reports) {
    running += report.comm_params_round;
    CHECK(report.comm_params_cumulative == running);
  }
}

TEST_CASE("fedavg with one client equals sequential SGD on that shard") {
  test::TempDir dir("fedet-orch");
  RunConfig config = tiny_config(dir);
  config.K = 1;
  config.m = 1;
  config.U = 1;
  config.small_widths = "4";
  config.algorithm = "fedavg";
  config.T = 3;
  const FedData data = prepare_data(config);
  TrainState state = init_state(config, data);
  const Model start = state.registry.server_model;
  for (int t = 0; t < 3; ++t) {
    (void)run_fedavg_round(state, config, data, t);
  }

  // Sequential oracle: the same tau-step runs chained by hand.
  Model expected = start;
  for (int t = 0; t < 3; ++t) {
    expected = local_train(
        expected, data.shards[0], {config.tau, config.b, config.eta},
        Rng::substream(config.seed, "client", static_cast<std::uint64_t>(t),
                       0));
  }
  CHECK(test::models_identical(state.registry.server_model, expected));
}

TEST_CASE("fedavg averaging of identical trainings is idempotent") {
  test::TempDir dir("fedet-orch");
  RunConfig config = tiny_config(dir);
  config.algorithm = "fedavg";
  config.K = 2;
  config.m = 2;
  config.T = 1;
  FedData data = prepare_data(config);
  // Force identical shards so both clients train identically except for
  // their RNG streams; collapse those too by making the shard one example.
  data.shards[0].examples.resize(1);
  data.shards[1] = data.shards[0];
  data.shards[1].client_id = 1;
  config.b = 1;
  config.tau = 3;
  TrainState state = init_state(config, data);
  const Model start = state.registry.server_model;
  (void)run_fedavg_round(state, config, data, 0);
  const Model expected =
      local_train(start, data.shards[0], {config.tau, config.b, config.eta},
                  Rng::substream(config.seed, "client", 0, 0));
  CHECK(test::models_identical(state.registry.server_model, expected));
}

TEST_CASE("fedavg traffic uses the server size and exceeds fed-et traffic") {
  test::TempDir dir("fedet-orch");
  RunConfig config = tiny_config(dir);
  const FedData data = prepare_data(config);

  TrainState fedet_state = init_state(config, data);
  const RoundReport fedet_report = run_round(fedet_state, config, data, 0);

  RunConfig avg_config = config;
  avg_config.algorithm = "fedavg";
  TrainState fedavg_state = init_state(avg_config, data);
  const RoundReport fedavg_report =
      run_fedavg_round(fedavg_state, avg_config, data, 0);

  const std::uint64_t server_params =
      fedavg_state.registry.server_model.param_count();
  CHECK(fedavg_report.comm_params_round ==
        2 * static_cast<std::uint64_t>(avg_config.m) * server_params);
  CHECK(fedavg_report.comm_params_round > fedet_report.comm_params_round);
}

TEST_CASE("checkpoints round-trip exactly") {
  test::TempDir dir("fedet-orch");
  const RunConfig config = tiny_config(dir);
  const FedData data = prepare_data(config);
  TrainState state = init_state(config, data);
  (void)run_round(state, config, data, 0);  // make parameters non-trivial
  const std::string path = dir.file("registry.txt");
  checkpoint_save(state.registry, path);
  const ModelRegistry loaded = checkpoint_load(path);
  CHECK(registries_identical(loaded, state.registry));
  // No temp residue from the atomic write.
  CHECK(!std::filesystem::exists(path + ".tmp"));
}

TEST_CASE("corrupt checkpoints name the offending tensor") {
  test::TempDir dir("fedet-orch");
  const RunConfig config = tiny_config(dir);
  const FedData data = prepare_data(config);
  const TrainState state = init_state(config, data);
  const std::string path = dir.file("registry.txt");
  checkpoint_save(state.registry, path);
  std::string text = slurp(path);
  const auto spot = text.find("weights");
  REQUIRE(spot != std::string::npos);
  text.replace(spot, 7, "wrights");
  {
    std::ofstream file(path, std::ios::trunc);
    file << text;
  }
  try {
    (void)checkpoint_load(path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("model 1 layer 0 weights") !=
          std::string::npos);
  }
  CHECK_THROWS_AS(checkpoint_load(dir.file("absent.txt")), IoError);
}

TEST_CASE("metrics rows carry the exact header and deterministic wall time") {
  test::TempDir dir("fedet-orch");
  RunConfig config = tiny_config(dir);
  config.T = 1;
  (void)run_training(config);
  const std::string text = slurp(config.metrics_path);
  CHECK(text.rfind("round,algorithm,lambda,seed,sampled_clients,"
                   "server_test_acc,server_test_loss,"
                   "mean_client_train_loss,comm_params_round,"
                   "comm_params_cumulative,wall_ms\n",
                   0) == 0);
  // One data row, ending in the fixed wall_ms column.
  const auto newline = text.find('\n');
  const std::string row = text.substr(newline + 1);
  CHECK(row.find(",0\n") == row.size() - 3);
  CHECK(row.rfind("0,fed-et,0.05,11,", 0) == 0);
}

#include "fedet/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "fedet/checkpoint.hpp"
#include "fedet/errors.hpp"
#include "fedet/parallel.hpp"

namespace fedet {

const char kMetricsHeader[] =
    "round,algorithm,lambda,seed,sampled_clients,server_test_acc,"
    "server_test_loss,mean_client_train_loss,comm_params_round,"
    "comm_params_cumulative,wall_ms";

namespace {

std::string fmt(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.12g", v);
  return buffer;
}

struct TrainedClient {
  int client_id = 0;
  Model model;
  double train_loss = 0.0;
};

// Local training for every sampled client, fanned out over the worker
// pool. Client order in the result is ascending (sampled ids are sorted);
// per-client RNG streams are keyed by (seed, round, client) so the result
// does not depend on scheduling.
std::vector<TrainedClient> train_sampled(const std::vector<int>& sampled,
                                         const Model& (*pick)(const TrainState&,
                                                              int, const RunConfig&),
                                         const TrainState& state,
                                         const RunConfig& config,
                                         const FedData& data, int round) {
  std::vector<TrainedClient> out(sampled.size());
  const LocalTrainConfig cfg{config.tau, config.b, config.eta};
  parallel_for(sampled.size(), config.workers, [&](std::size_t i) {
    const int client_id = sampled[i];
    const ClientShard& shard = data.shards[static_cast<std::size_t>(client_id)];
    Model trained = local_train(
        pick(state, client_id, config), shard, cfg,
        Rng::substream(config.seed, "client", static_cast<std::uint64_t>(round),
                       static_cast<std::uint64_t>(client_id)));
    const double loss = evaluate(trained, shard.examples).mean_loss;
    out[i] = {client_id, std::move(trained), loss};
  });
  return out;
}

const Model& pick_designated(const TrainState& state, int client_id,
                             const RunConfig&) {
  return state.registry.small_models.at(state.registry.assignment.at(client_id));
}

const Model& pick_server(const TrainState& state, int, const RunConfig&) {
  return state.registry.server_model;
}

double mean_train_loss(const std::vector<TrainedClient>& trained) {
  double total = 0.0;
  for (const auto& client : trained) total += client.train_loss;
  return total / static_cast<double>(trained.size());
}

DataSplits synthesize_splits_impl(const RunConfig& config) {
  const std::size_t per_class = config.train_per_class +
                                config.public_per_class +
                                config.test_per_class;
  const std::vector<LabeledExample> pool = generate_synthetic(
      config.N, config.d, per_class, config.spread, config.seed);

  DataSplits splits;
  std::vector<LabeledExample> public_source;
  // The pool is class-blocked; within a class the draws are exchangeable,
  // so contiguous slices give the three disjoint splits.
  for (std::size_t c = 0; c < config.N; ++c) {
    const std::size_t base = c * per_class;
    for (std::size_t i = 0; i < config.train_per_class; ++i) {
      splits.train.push_back(pool[base + i]);
    }
    for (std::size_t i = 0; i < config.public_per_class; ++i) {
      public_source.push_back(pool[base + config.train_per_class + i]);
    }
    for (std::size_t i = 0; i < config.test_per_class; ++i) {
      splits.test.push_back(
          pool[base + config.train_per_class + config.public_per_class + i]);
    }
  }
  splits.public_set =
      derive_public_set(public_source, config.noise_std, config.seed);
  return splits;
}

}  // namespace

DataSplits synthesize_splits(const RunConfig& config) {
  return synthesize_splits_impl(config);
}

std::vector<std::size_t> FedData::shard_sizes() const {
  std::vector<std::size_t> sizes;
  sizes.reserve(shards.size());
  for (const auto& shard : shards) sizes.push_back(shard.examples.size());
  return sizes;
}

std::vector<int> sample_clients(std::span<const std::size_t> shard_sizes,
                                std::size_t m, Rng& rng) {
  if (m > shard_sizes.size()) {
    throw ConfigError("sample_clients: m exceeds client count");
  }
  std::vector<int> ids(shard_sizes.size());
  std::vector<double> weights(shard_sizes.size());
  for (std::size_t k = 0; k < shard_sizes.size(); ++k) {
    if (shard_sizes[k] == 0) {
      throw ArgumentError("sample_clients: zero shard size");
    }
    ids[k] = static_cast<int>(k);
    weights[k] = static_cast<double>(shard_sizes[k]);
  }
  std::vector<int> chosen;
  chosen.reserve(m);
  for (std::size_t draw = 0; draw < m; ++draw) {
    const double total =
        std::accumulate(weights.begin(), weights.end(), 0.0);
    const double u = rng.next_double() * total;
    double cumulative = 0.0;
    std::size_t pick = weights.size() - 1;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      cumulative += weights[i];
      if (u < cumulative) {
        pick = i;
        break;
      }
    }
    chosen.push_back(ids[pick]);
    ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(pick));
    weights.erase(weights.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

FedData prepare_data(const RunConfig& config) {
  FedData data;
  if (config.has_dataset_paths()) {
    data.train = load_csv(config.train_path);
    data.public_set = load_public_csv(config.public_path);
    data.test = load_csv(config.test_path);
  } else {
    DataSplits splits = synthesize_splits_impl(config);
    data.train = std::move(splits.train);
    data.public_set = std::move(splits.public_set);
    data.test = std::move(splits.test);
  }
  if (data.train.empty()) throw ConfigError("training split is empty");
  if (data.public_set.inputs.empty()) {
    throw ConfigError("public split is empty");
  }
  if (data.test.empty()) throw ConfigError("test split is empty");

  PartitionSpec spec;
  spec.client_count = config.K;
  spec.alpha = config.alpha;
  spec.seed = config.seed;
  // Nonempty shards suffice: batches larger than a shard sample with
  // replacement. Requiring b examples per shard is unsatisfiable for
  // sparse Dirichlet draws (small alpha, many clients).
  spec.min_shard_size = 1;
  data.shards = dirichlet_partition(data.train, spec);
  return data;
}

TrainState init_state(const RunConfig& config, const FedData& data) {
  TrainState state;
  state.registry = registry_init(config.small_specs(), config.server_spec(),
                                 config.N, config.seed);
  std::vector<int> client_ids(config.K);
  std::iota(client_ids.begin(), client_ids.end(), 0);
  state.registry.assignment =
      assign_models(client_ids, config.U, config.seed);
  // Start with the pool's heads aligned to the server head, the same
  // invariant every round's broadcast re-establishes.
  broadcast_server_head(state.registry);
  (void)data;
  return state;
}

RoundReport run_round(TrainState& state, const RunConfig& config,
                      const FedData& data, int round) {
  const auto started = std::chrono::steady_clock::now();
  TrainState next = state;  // work on a copy; commit only on success

  Rng sample_rng = Rng::substream(config.seed, "sample",
                                  static_cast<std::uint64_t>(round));
  const std::vector<int> sampled =
      sample_clients(data.shard_sizes(), config.m, sample_rng);

  const std::vector<TrainedClient> trained =
      train_sampled(sampled, pick_designated, next, config, data, round);

  std::uint64_t comm = 0;
  for (int client_id : sampled) {
    const int model_id = next.registry.assignment.at(client_id);
    // Down and up of the designated small model.
    comm += 2 * static_cast<std::uint64_t>(
                    next.registry.param_count_of(model_id));
  }

  // Step 1 tail: transfer the averaged client representation to the server.
  std::vector<const Model*> received;
  received.reserve(trained.size());
  for (const auto& client : trained) received.push_back(&client.model);
  next.registry.server_model.set_head(average_client_heads(received));

  // Step 2: consensus targets from the frozen client models, then server SGD.
  std::map<int, const Model*> by_client;
  for (const auto& client : trained) {
    by_client.emplace(client.client_id, &client.model);
  }
  const std::vector<SampleTargets> targets = compute_round_targets(
      by_client, data.public_set, !config.raw_diversity_target,
      static_cast<int>(config.workers));
  server_update(next.registry.server_model, data.public_set, targets,
                config.tau_s, config.b_s, config.eta_s, config.lambda,
                Rng::substream(config.seed, "server",
                               static_cast<std::uint64_t>(round)));

  // Step 3: same-architecture aggregation, then head broadcast.
  std::map<int, std::vector<const Model*>> received_by_id;
  for (const auto& client : trained) {
    received_by_id[next.registry.assignment.at(client.client_id)].push_back(
        &client.model);
  }
  aggregate_same_arch(next.registry, received_by_id);
  broadcast_server_head(next.registry);

  const EvalResult eval = evaluate(next.registry.server_model, data.test);

  RoundReport report;
  report.round = round;
  report.sampled_clients = sampled;
  report.server_test_acc = eval.accuracy;
  report.server_test_loss = eval.mean_loss;
  report.mean_client_train_loss = mean_train_loss(trained);
  report.comm_params_round = comm;
  next.comm_params_cumulative += comm;
  report.comm_params_cumulative = next.comm_params_cumulative;
  report.wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - started)
                       .count();
  state = std::move(next);
  return report;
}

RoundReport run_fedavg_round(TrainState& state, const RunConfig& config,
                             const FedData& data, int round) {
  const auto started = std::chrono::steady_clock::now();
  TrainState next = state;

  Rng sample_rng = Rng::substream(config.seed, "sample",
                                  static_cast<std::uint64_t>(round));
  const std::vector<int> sampled =
      sample_clients(data.shard_sizes(), config.m, sample_rng);

  const std::vector<TrainedClient> trained =
      train_sampled(sampled, pick_server, next, config, data, round);

  // Size-weighted parameter averaging over the sampled clients.
  double total_size = 0.0;
  for (int client_id : sampled) {
    total_size += static_cast<double>(
        data.shards[static_cast<std::size_t>(client_id)].examples.size());
  }
  Model& global = next.registry.server_model;
  for (std::size_t l = 0; l < global.layers.size(); ++l) {
    auto blend = [&](Tensor& target, auto member) {
      for (std::size_t i = 0; i < target.data.size(); ++i) {
        double sum = 0.0;
        for (const auto& client : trained) {
          const double weight =
              static_cast<double>(data.shards[static_cast<std::size_t>(
                                                  client.client_id)]
                                      .examples.size()) /
              total_size;
          sum += weight * member(client.model.layers[l]).data[i];
        }
        target.data[i] = sum;
      }
    };
    blend(global.layers[l].weights,
          [](const DenseLayer& layer) -> const Tensor& { return layer.weights; });
    blend(global.layers[l].bias,
          [](const DenseLayer& layer) -> const Tensor& { return layer.bias; });
  }

  const std::uint64_t comm =
      2 * static_cast<std::uint64_t>(config.m) *
      static_cast<std::uint64_t>(global.param_count());
  const EvalResult eval = evaluate(global, data.test);

  RoundReport report;
  report.round = round;
  report.sampled_clients = sampled;
  report.server_test_acc = eval.accuracy;
  report.server_test_loss = eval.mean_loss;
  report.mean_client_train_loss = mean_train_loss(trained);
  report.comm_params_round = comm;
  next.comm_params_cumulative += comm;
  report.comm_params_cumulative = next.comm_params_cumulative;
  report.wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - started)
                       .count();
  state = std::move(next);
  return report;
}

std::string metrics_row(const RoundReport& report, const RunConfig& config) {
  std::ostringstream row;
  row << report.round << ',' << config.algorithm << ','
      << fmt(config.lambda) << ',' << config.seed << ',';
  for (std::size_t i = 0; i < report.sampled_clients.size(); ++i) {
    if (i > 0) row << ';';
    row << report.sampled_clients[i];
  }
  row << ',' << fmt(report.server_test_acc) << ','
      << fmt(report.server_test_loss) << ','
      << fmt(report.mean_client_train_loss) << ','
      << report.comm_params_round << ',' << report.comm_params_cumulative
      // The CSV is a pure function of the config; measured wall time goes
      // to the progress stream.
      << ",0";
  return row.str();
}

RunResult run_training(const RunConfig& config, const FedData& data,
                       std::ostream* progress) {
  validate(config);
  std::ofstream metrics(config.metrics_path, std::ios::trunc);
  if (!metrics) {
    throw IoError("cannot open metrics file: " + config.metrics_path);
  }
  metrics << kMetricsHeader << "\n";
  metrics.flush();

  RunResult result;
  result.state = init_state(config, data);
  const bool fedavg = config.algorithm == "fedavg";
  for (std::size_t t = 0; t < config.T; ++t) {
    RoundReport report =
        fedavg ? run_fedavg_round(result.state, config, data,
                                  static_cast<int>(t))
               : run_round(result.state, config, data, static_cast<int>(t));
    metrics << metrics_row(report, config) << "\n";
    metrics.flush();
    if (!metrics) {
      throw IoError("metrics write failed: " + config.metrics_path);
    }
    if (progress) {
      *progress << "round " << t << "  acc " << fmt(report.server_test_acc)
                << "  loss " << fmt(report.server_test_loss) << "  comm "
                << report.comm_params_cumulative << "  wall "
                << fmt(report.wall_ms) << " ms\n";
    }
    result.reports.push_back(std::move(report));
  }
  checkpoint_save(result.state.registry, config.checkpoint_path);
  return result;
}

RunResult run_training(const RunConfig& config, std::ostream* progress) {
  validate(config);
  const FedData data = prepare_data(config);
  return run_training(config, data, progress);
}

}  // namespace fedet

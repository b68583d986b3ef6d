#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fedet/config.hpp"
#include "fedet/data.hpp"
#include "fedet/ensemble.hpp"
#include "fedet/model.hpp"

namespace fedet {

struct RoundReport {
  int round = 0;
  std::vector<int> sampled_clients;  // ascending
  double server_test_acc = 0.0;
  double server_test_loss = 0.0;
  double mean_client_train_loss = 0.0;
  std::uint64_t comm_params_round = 0;
  std::uint64_t comm_params_cumulative = 0;
  double wall_ms = 0.0;  // measured; reported on the console, not in the CSV
};

/// Weighted sampling without replacement: m sequential draws with
/// probability proportional to shard size among the remaining clients.
/// Returned ids are sorted ascending.
std::vector<int> sample_clients(std::span<const std::size_t> shard_sizes,
                                std::size_t m, Rng& rng);

/// The three disjoint synthetic splits (7:1:2 by default via the per-class
/// counts in the config).
struct DataSplits {
  std::vector<LabeledExample> train;
  PublicSet public_set;
  std::vector<LabeledExample> test;
};

DataSplits synthesize_splits(const RunConfig& config);

/// Immutable per-run data: the loaded or generated splits plus the shards.
struct FedData {
  std::vector<LabeledExample> train;
  PublicSet public_set;
  std::vector<LabeledExample> test;
  std::vector<ClientShard> shards;

  std::vector<std::size_t> shard_sizes() const;
};

/// Loads the configured CSVs or synthesizes the splits, then partitions.
FedData prepare_data(const RunConfig& config);

/// Mutable training state; cheap to copy, which is how a round stays atomic
/// (work happens on a copy that is committed only on success).
struct TrainState {
  ModelRegistry registry;
  std::uint64_t comm_params_cumulative = 0;
};

TrainState init_state(const RunConfig& config, const FedData& data);

/// One fed-et round: sample clients, local training in parallel, head
/// transfer, consensus targets, server SGD, same-arch aggregation, head
/// broadcast. Throws on error without touching `state`.
RoundReport run_round(TrainState& state, const RunConfig& config,
                      const FedData& data, int round);

/// One FedAvg baseline round: the server architecture at every client,
/// size-weighted parameter averaging, no public data.
RoundReport run_fedavg_round(TrainState& state, const RunConfig& config,
                             const FedData& data, int round);

struct RunResult {
  TrainState state;
  std::vector<RoundReport> reports;
};

/// T rounds of the configured algorithm. Metrics rows are flushed per
/// round; the final registry is checkpointed to config.checkpoint_path.
RunResult run_training(const RunConfig& config, const FedData& data,
                       std::ostream* progress = nullptr);
RunResult run_training(const RunConfig& config, std::ostream* progress = nullptr);

extern const char kMetricsHeader[];
std::string metrics_row(const RoundReport& report, const RunConfig& config);

}  // namespace fedet

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cws/client.hpp"
#include "cws/cluster.hpp"
#include "cws/config.hpp"
#include "cws/simulator.hpp"
#include "cws/workload.hpp"

namespace cws {

struct ExperimentRow {
  std::string workload;
  std::string strategy;
  std::uint64_t seed = 0;
  double makespan_s = 0;
  std::size_t failed = 0;
  double wastage = 0;
  std::size_t total_tasks = 0;     // not part of the CSV
  std::string decision_log_path;   // not part of the CSV

  friend bool operator==(const ExperimentRow&, const ExperimentRow&) = default;
};

struct ExperimentOptions {
  int repetitions = 1;  // seeds cluster.seed, cluster.seed + 1, ...
  SimOptions sim;
  ServiceConfig config;
  std::optional<std::filesystem::path> decision_log_dir;
};

// One row per (workload, strategy, seed). A run that throws is recorded
// with every task counted as failed instead of aborting the sweep.
std::vector<ExperimentRow> run_experiment(const std::vector<WorkloadDef>& workloads,
                                          const std::vector<std::string>& strategies,
                                          const ClusterDef& cluster,
                                          const ExperimentOptions& options = {});

ExperimentRow row_from_result(const WorkloadDef& workload, const std::string& strategy,
                              std::uint64_t seed, const SimResult& result);

// Columns: workload,strategy,seed,makespan_s,failed,wastage
std::string to_csv(const std::vector<ExperimentRow>& rows);
std::vector<ExperimentRow> parse_csv(const std::string& text);

// Per workload, the median makespan of each strategy and its percentage
// change against the fifo baseline.
std::string baseline_report(const std::vector<ExperimentRow>& rows);

// Drives a running `cws serve` with the same simulator loop; the server must
// have been started with the same cluster definition.
SimResult drive_live_server(CwsiClient& client, const ClusterDef& cluster,
                            const WorkloadDef& workload, const std::string& strategy,
                            const SimOptions& options = {});

std::vector<WorkloadDef> load_workload_dir(const std::filesystem::path& dir);

}  // namespace cws

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cws/units.hpp"
#include "cws/workflow.hpp"

namespace cws {

enum class RevealMode {
  kFullDag,      // the engine knows the physical DAG up front and submits it whole
  kIncremental,  // dataflow style: tasks are submitted once their inputs exist
};

std::string_view to_string(RevealMode mode);
RevealMode reveal_mode_from_string(std::string_view name);

// Ground truth the simulator uses to execute a task. Never sent to the
// scheduler.
struct SimTruth {
  Seconds true_runtime_s{1};  // on the reference machine
  Bytes true_peak_memory_bytes = 0;
  std::vector<InputFile> output_files;

  friend bool operator==(const SimTruth&, const SimTruth&) = default;
};

struct WorkloadTask {
  TaskSpec spec;
  SimTruth truth;

  friend bool operator==(const WorkloadTask&, const WorkloadTask&) = default;
};

struct WorkloadDef {
  std::string name;
  RevealMode reveal_mode = RevealMode::kFullDag;
  std::vector<WorkloadTask> tasks;

  const WorkloadTask& task(const std::string& task_id) const;
  std::vector<TaskSpec> specs() const;

  friend bool operator==(const WorkloadDef&, const WorkloadDef&) = default;
};

// Validates ids, requests, dependencies and acyclicity. Throws
// CwsError(kValidation) or CwsError(kCycle) naming the offending edges.
void validate(const WorkloadDef& workload);

// Parse failures report line and column.
WorkloadDef parse_workload(std::string_view text);
WorkloadDef load_workload(const std::filesystem::path& path);
std::string dump_workload(const WorkloadDef& workload);

enum class WorkloadShape { kChain, kForkJoin, kDiamondMesh };

std::string_view to_string(WorkloadShape shape);
WorkloadShape workload_shape_from_string(std::string_view name);

// Deterministic per seed. Reference runtimes are log-uniform in [10, 600] s,
// memory log-uniform in [256 MiB, 8 GiB] per process (true peaks 50 to 95 %
// of it), input size proportional to runtime with multiplicative noise.
WorkloadDef generate_workload(WorkloadShape shape, int n_tasks, std::uint64_t seed);

}  // namespace cws

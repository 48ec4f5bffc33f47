#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cws/units.hpp"
#include "cws/workflow.hpp"

namespace cws {

// Microbenchmark score of a node; 1000 is the reference machine.
using BenchScore = boost::rational<std::int64_t>;
inline constexpr std::int64_t kReferenceBenchScore = 1000;

BenchScore bench_score_from_double(double score);

struct NodeState {
  std::string node_id;
  MilliCores cpu_capacity;
  Bytes memory_capacity = 0;
  MilliCores cpu_free;
  Bytes memory_free = 0;
  std::set<std::string> stored_files;
  BenchScore bench_score{kReferenceBenchScore};

  static NodeState make(std::string node_id, MilliCores cpu, Bytes memory, BenchScore score);
  // bench_score / reference; exact.
  BenchScore factor() const { return bench_score / kReferenceBenchScore; }
};

struct Assignment {
  std::string task_id;
  std::string node_id;
  Bytes memory_allocation_bytes = 0;
  std::int64_t sequence_number = 0;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

enum class StrategyName { kFifo, kRoundRobin, kRankMinRr, kRankMaxRr, kWrankRr, kGroupMatch };

std::string_view to_string(StrategyName s);
std::optional<StrategyName> strategy_from_string(std::string_view name);
const std::vector<StrategyName>& strategy_catalogue();
std::vector<std::string> strategy_names();

bool uses_ranks(StrategyName s);

// A READY task as seen by placement: its request plus current allocation,
// which grows past the original request after out-of-memory retries.
struct PendingTask {
  std::string task_id;
  std::string process_name;
  MilliCores cpu_request;
  Bytes memory_allocation_bytes = 0;
  std::vector<InputFile> input_files;
};

// Indices of nodes that can host the task right now, in input order.
std::vector<std::size_t> filter_feasible(const PendingTask& task,
                                         const std::vector<NodeState>& nodes);

// Fraction of the task's input bytes already stored on the node.
double locality_fraction(const PendingTask& task, const NodeState& node);

// Orders READY tasks for placement. `ready` must be in submission order.
// Throws CwsError(kValidation) when wrank_rr is requested without estimates.
std::vector<std::string> prioritize(
    StrategyName strategy, const std::vector<std::string>& ready, const WorkflowDag& dag,
    const RankTable& ranks,
    const std::unordered_map<std::string, double>* weighted_ranks = nullptr);

struct RoundRobinCursor {
  std::size_t next = 0;
};

// Walks `ordered`, sending each task to the first feasible node at or after
// the cursor (wrapping). Free resources are debited on `nodes` as tasks are
// placed. With `stop_at_blocked` the walk ends at the first task that does
// not fit, giving strict head-of-line order.
std::vector<Assignment> place_round_robin(const std::vector<PendingTask>& ordered,
                                          std::vector<NodeState>& nodes,
                                          RoundRobinCursor& cursor,
                                          bool stop_at_blocked = false);

// Group index per node: nodes are split into `group_count` bands of
// bench-score quantiles (slowest band is 0). Equal scores share a band.
std::vector<int> node_groups(const std::vector<NodeState>& nodes, int group_count);
int group_count_for(const std::vector<NodeState>& nodes, int max_groups);

// Classifies processes into `group_count` bands by median peak memory
// (lightest band is 0). Processes missing from the map land in the middle band.
int process_group(const std::string& process_name,
                  const std::unordered_map<std::string, double>& median_peaks,
                  int group_count);

struct GroupCursors {
  std::vector<std::size_t> per_group;
};

// Places task group g round robin within node group g, trying adjacent
// groups in order of distance (faster first on ties) when g has no room.
std::vector<Assignment> place_group_match(
    const std::vector<PendingTask>& ordered, std::vector<NodeState>& nodes,
    const std::unordered_map<std::string, double>& median_peaks, GroupCursors& cursors,
    int max_groups = 3);

}  // namespace cws

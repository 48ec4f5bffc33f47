#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cws/client.hpp"
#include "cws/cluster.hpp"
#include "cws/config.hpp"
#include "cws/predictors.hpp"
#include "cws/protocol.hpp"
#include "cws/provenance.hpp"
#include "cws/workload.hpp"

namespace cws {

// Declaration order is the tie-break at equal times: completions release
// capacity before new starts are processed.
enum class SimEventKind { kTaskFinish, kTaskOom, kTaskStart };

std::string_view to_string(SimEventKind kind);

struct SimEvent {
  Seconds time{0};
  SimEventKind kind = SimEventKind::kTaskStart;
  std::string task_id;
  std::string node_id;

  friend bool operator==(const SimEvent&, const SimEvent&) = default;
};

// Orders by (time, kind, task_id).
struct SimEventAfter {
  bool operator()(const SimEvent& a, const SimEvent& b) const;
};

std::string format_event(const SimEvent& e);

struct SimOptions {
  Seconds oom_delay{1};
  // Multiplies each attempt's duration by a factor drawn uniformly from
  // [1 - jitter, 1 + jitter] (quantized to 1/1000) using the cluster seed.
  double runtime_jitter = 0;
  std::optional<std::uint64_t> seed;  // overrides ClusterDef::seed
  std::string workflow_id;            // defaults to the workload name
  bool check_capacity_every_step = true;
};

// Capacity bookkeeping replayable after the fact: every assignment debits
// its node, every completion credits it back.
struct LedgerEntry {
  enum class Kind { kAssign, kRelease };
  Kind kind = Kind::kAssign;
  std::string task_id;
  std::string node_id;
  MilliCores cpu;
  Bytes memory = 0;
};

// Replays a ledger against initial capacities; returns one line per step
// that drives a node's free CPU or memory negative.
std::vector<std::string> replay_ledger(const ClusterDef& cluster,
                                       const std::vector<LedgerEntry>& ledger);

struct TaskTrace {
  std::string task_id;
  std::string node_id;
  Seconds start{0};
  Seconds finish{0};
  int attempts = 0;
  bool succeeded = false;
};

struct SimResult {
  Seconds makespan{0};
  std::vector<SimEvent> events;
  std::vector<TaskTrace> tasks;
  std::vector<AttemptUsage> attempts;
  std::map<std::string, WastageEntry> wastage;
  std::vector<LedgerEntry> ledger;
  std::vector<Assignment> assignments;
  std::size_t failed = 0;      // permanently failed
  std::size_t unfinished = 0;  // never completed (blocked or unplaceable)
  std::size_t capacity_violations = 0;
  protocol::WorkflowSummary summary;

  std::string event_log() const;
};

// Discrete-event stand-in for the resource manager's execution layer. It
// also plays the workflow engine: it submits tasks over a CwsiClient,
// executes whatever the scheduler assigns for true_runtime / node factor
// seconds, and reports outcomes back. Single threaded; virtual time is exact.
class Simulator {
 public:
  // `clock` receives the current virtual time after every event so that an
  // in-process service can timestamp provenance with it.
  Simulator(ClusterDef cluster, WorkloadDef workload, CwsiClient& client, std::string strategy,
            SimOptions options = {}, std::shared_ptr<Seconds> clock = nullptr);

  // Registers the workflow and performs the initial submission.
  void start();
  // Pops one event and applies it; nullopt once the queue is empty.
  std::optional<SimEvent> step();
  // Closes the workflow and assembles the result.
  SimResult finish();
  SimResult run();

  Seconds now() const { return now_; }
  // Shared view of the virtual clock for an in-process service.
  std::shared_ptr<const Seconds> clock_source() const { return clock_; }

  // Recomputes per-node usage from running tasks; returns violations.
  std::vector<std::string> capacity_check() const;
  // Fault injection for tests: books resources on a node outside the scheduler.
  void inject_booking(const std::string& node_id, MilliCores cpu, Bytes memory);

 private:
  struct Running {
    std::string node_id;
    MilliCores cpu;
    Bytes allocation = 0;
    Seconds started{0};
  };

  void fetch_and_start();
  void submit_newly_ready(const std::string& finished_task);
  const NodeDef& node(const std::string& node_id) const;
  Seconds attempt_duration(const WorkloadTask& task, const NodeDef& node);

  ClusterDef cluster_;
  WorkloadDef workload_;
  CwsiClient& client_;
  std::string strategy_;
  SimOptions options_;
  std::string workflow_id_;

  std::shared_ptr<Seconds> clock_;
  Seconds now_{0};
  std::priority_queue<SimEvent, std::vector<SimEvent>, SimEventAfter> queue_;
  std::int64_t last_sequence_ = 0;
  std::uint64_t rng_state_ = 0;

  std::map<std::string, Running> running_;
  std::vector<std::pair<std::string, Running>> injected_;
  std::set<std::string> submitted_;
  std::set<std::string> succeeded_;
  std::set<std::string> failed_;
  std::map<std::string, TaskTrace> traces_;
  std::map<std::string, std::size_t> order_;  // workload position

  SimResult result_;
  bool started_ = false;
  Seconds first_start_{0};
  bool any_start_ = false;
};

// Runs one workload against a fresh in-process service whose provenance
// clock is the simulator's virtual time.
struct InProcessRun {
  SimResult result;
  std::shared_ptr<ProvenanceStore> provenance;
};

InProcessRun run_simulation(const ClusterDef& cluster, const WorkloadDef& workload,
                            const std::string& strategy, const SimOptions& options = {},
                            const ServiceConfig& config = {});

}  // namespace cws

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "cws/cluster.hpp"
#include "cws/config.hpp"
#include "cws/predictors.hpp"
#include "cws/protocol.hpp"
#include "cws/provenance.hpp"
#include "cws/scheduler.hpp"
#include "cws/workflow.hpp"

namespace cws {

// The scheduler service behind the wire protocol. Each workflow has its own
// writer lock; the node registry is shared across workflows behind a single
// mutex that is always taken after a workflow lock, never before.
//
// Scheduling is event driven: every submission, edge push and status report
// runs a tick for the affected workflow, and any report that releases
// capacity also re-examines every other open workflow.
class CwsService {
 public:
  explicit CwsService(ClusterDef cluster, ServiceConfig config = {}, Clock clock = {},
                      std::shared_ptr<ProvenanceStore> store = nullptr);
  ~CwsService();

  CwsService(const CwsService&) = delete;
  CwsService& operator=(const CwsService&) = delete;

  protocol::RegisterResponse register_workflow(const protocol::RegisterRequest& request);
  std::size_t submit_tasks(const std::string& workflow_id, const std::vector<TaskSpec>& batch);
  void push_dag_edges(const std::string& workflow_id, const protocol::DagPatch& patch);
  // Decisions with sequence > after. With `wait`, blocks until one exists or
  // the timeout (default: configured long-poll timeout) elapses.
  protocol::AssignmentResponse fetch_assignments(
      const std::string& workflow_id, std::int64_t after, bool wait,
      std::optional<std::chrono::milliseconds> timeout = std::nullopt);
  protocol::StatusAck report_status(const std::string& workflow_id,
                                    const protocol::StatusReport& report);
  protocol::WorkflowSummary close_workflow(const std::string& workflow_id);

  // Requires a closed workflow.
  std::map<std::string, WastageEntry> wastage_report(const std::string& workflow_id) const;

  std::vector<std::string> strategies() const { return strategy_names(); }
  std::vector<NodeState> nodes() const;
  WorkflowDag snapshot(const std::string& workflow_id) const;
  std::vector<Assignment> decision_log(const std::string& workflow_id) const;
  bool is_closed(const std::string& workflow_id) const;

  const ProvenanceStore& provenance() const { return *store_; }
  std::shared_ptr<ProvenanceStore> provenance_handle() const { return store_; }
  const RuntimePredictor& runtime_predictor() const { return runtime_; }
  const MemoryPredictor& memory_predictor() const { return memory_; }
  const ServiceConfig& config() const { return config_; }

  // Wakes every blocked long poll; used on server shutdown.
  void shutdown();

 private:
  struct TaskRuntime {
    Bytes allocation = 0;
    int oom_count = 0;
    std::optional<std::string> node_id;
    bool ready_recorded = false;
  };

  struct Workflow {
    std::mutex mutex;
    std::condition_variable changed;
    std::string id;
    StrategyName strategy = StrategyName::kFifo;
    std::string engine_name;
    WorkflowDag dag;
    std::unordered_map<std::string, TaskRuntime> runtime;
    std::vector<Assignment> decisions;
    RoundRobinCursor cursor;
    GroupCursors group_cursors;
    bool closed = false;
    std::optional<protocol::WorkflowSummary> summary;

    explicit Workflow(std::string workflow_id) : id(workflow_id), dag(std::move(workflow_id)) {}
  };

  std::shared_ptr<Workflow> find(const std::string& workflow_id) const;
  std::string predictor_key(const Workflow& wf, const std::string& process_name) const;
  void record(const Workflow& wf, const std::string& task_id, EventKind kind,
              nlohmann::ordered_json payload) const;
  // Largest memory among nodes with at least `cpu` cores.
  Bytes host_limit(MilliCores cpu) const;
  void on_ready(Workflow& wf, const std::vector<std::string>& ready);
  // Caller holds wf.mutex.
  std::size_t schedule_tick(Workflow& wf);
  void tick_others(const Workflow& except);
  void release(Workflow& wf, const std::string& task_id);

  ServiceConfig config_;
  ClusterDef cluster_;
  Clock clock_;
  std::shared_ptr<ProvenanceStore> store_;
  RuntimePredictor runtime_;
  MemoryPredictor memory_;

  mutable std::mutex nodes_mutex_;
  std::vector<NodeState> nodes_;

  mutable std::shared_mutex workflows_mutex_;
  std::map<std::string, std::shared_ptr<Workflow>> workflows_;
  std::vector<std::string> registration_order_;
  std::atomic<bool> shutting_down_{false};
};

}  // namespace cws

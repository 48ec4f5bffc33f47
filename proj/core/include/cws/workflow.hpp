#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cws/units.hpp"

namespace cws {

struct InputFile {
  std::string path;
  Bytes size_bytes = 0;

  friend bool operator==(const InputFile&, const InputFile&) = default;
};

// One task invocation as handed over by a workflow engine.
struct TaskSpec {
  std::string task_id;
  std::string process_name;
  MilliCores cpu_request;
  Bytes memory_request_bytes = 0;
  std::vector<InputFile> input_files;
  std::map<std::string, std::string> parameters;
  std::vector<std::string> depends_on;

  Bytes input_bytes_total() const;

  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

// Throws CwsError(kValidation) on a malformed spec.
void validate(const TaskSpec& spec);

enum class TaskState { kSubmitted, kReady, kAssigned, kRunning, kSucceeded, kFailed };

std::string_view to_string(TaskState state);
TaskState task_state_from_string(std::string_view name);

using Edge = std::pair<std::string, std::string>;  // (from, to)

using RankTable = std::unordered_map<std::string, int>;

// Physical and abstract dependency graphs of one workflow plus per-task
// lifecycle state. Physical edges are kept acyclic across every mutation;
// abstract edges are metadata and never influence readiness.
class WorkflowDag {
 public:
  explicit WorkflowDag(std::string workflow_id);

  const std::string& workflow_id() const { return workflow_id_; }
  std::size_t size() const { return nodes_.size(); }
  bool contains(std::string_view task_id) const;

  // Adds a batch atomically. Dependencies may point at existing tasks or at
  // other members of the batch. Returns the ids that are READY afterwards.
  std::vector<std::string> add_tasks(const std::vector<TaskSpec>& batch);
  std::vector<std::string> add_task(const TaskSpec& spec) { return add_tasks({spec}); }

  // Adds physical edges atomically. A READY target whose new predecessor has
  // not succeeded is moved back to SUBMITTED; targets already dispatched
  // cannot be blocked and are rejected.
  void add_edges(const std::vector<Edge>& edges);
  void add_abstract_edges(const std::vector<Edge>& edges);

  void mark_assigned(const std::string& task_id);
  void mark_running(const std::string& task_id);
  // Returns successors whose predecessors are now all SUCCEEDED.
  std::vector<std::string> mark_finished(const std::string& task_id, TaskState outcome);
  // FAILED -> READY for an in-place retry (out-of-memory resubmission).
  void requeue(const std::string& task_id);

  TaskState state(const std::string& task_id) const;
  const TaskSpec& task(const std::string& task_id) const;
  // Position in the overall submission order.
  std::size_t submission_index(const std::string& task_id) const;

  // Task ids in submission order.
  std::vector<std::string> task_ids() const;
  std::vector<std::string> tasks_in_state(TaskState state) const;
  std::vector<std::string> successors(const std::string& task_id) const;
  std::vector<std::string> predecessors(const std::string& task_id) const;

  const std::set<Edge>& physical_edges() const { return physical_edges_; }
  const std::set<Edge>& abstract_edges() const { return abstract_edges_; }

  // Successor indices in submission order, for graph algorithms.
  const std::vector<std::size_t>& successor_indices(std::size_t index) const {
    return nodes_[index].succ;
  }
  const std::string& id_at(std::size_t index) const { return nodes_[index].spec.task_id; }

 private:
  struct Node {
    TaskSpec spec;
    TaskState state = TaskState::kSubmitted;
    std::vector<std::size_t> succ;
    std::vector<std::size_t> pred;
  };

  std::size_t index_of(const std::string& task_id) const;
  bool all_predecessors_succeeded(std::size_t index) const;

  std::string workflow_id_;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> index_;
  std::set<Edge> physical_edges_;
  std::set<Edge> abstract_edges_;
};

// Length in edges of the longest path from each task to any sink.
RankTable compute_ranks(const WorkflowDag& dag);

// Upward rank with runtime estimates as node weights and no communication
// cost: wrank(t) = estimate(t) + max over successors of wrank(s).
std::unordered_map<std::string, double> weighted_ranks(
    const WorkflowDag& dag, const std::unordered_map<std::string, double>& estimates);

}  // namespace cws

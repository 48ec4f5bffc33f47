#include "cws/workflow.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <unordered_set>

#include "cws/error.hpp"

namespace cws {

Bytes TaskSpec::input_bytes_total() const {
  Bytes total = 0;
  for (const auto& f : input_files) total += f.size_bytes;
  return total;
}

void validate(const TaskSpec& spec) {
  if (spec.task_id.empty()) throw CwsError(ErrorCode::kValidation, "task_id must be non-empty");
  const std::string where = "task '" + spec.task_id + "': ";
  if (spec.cpu_request.value <= 0) {
    throw CwsError(ErrorCode::kValidation, where + "cpu_request must be positive");
  }
  if (spec.memory_request_bytes <= 0) {
    throw CwsError(ErrorCode::kValidation, where + "memory_request_bytes must be positive");
  }
  for (const auto& f : spec.input_files) {
    if (f.size_bytes < 0) {
      throw CwsError(ErrorCode::kValidation, where + "input file '" + f.path + "' has negative size");
    }
  }
  std::unordered_set<std::string> seen;
  for (const auto& dep : spec.depends_on) {
    if (dep == spec.task_id) throw CwsError(ErrorCode::kValidation, where + "depends on itself");
    if (!seen.insert(dep).second) {
      throw CwsError(ErrorCode::kValidation, where + "duplicate dependency '" + dep + "'");
    }
  }
}

namespace {

constexpr std::array<std::string_view, 6> kStateNames{"SUBMITTED", "READY",     "ASSIGNED",
                                                      "RUNNING",   "SUCCEEDED", "FAILED"};

std::string edge_name(const Edge& e) { return "(" + e.first + "," + e.second + ")"; }

// True when `to` is reachable from `from` over the given adjacency.
bool reaches(const std::vector<std::vector<std::size_t>>& succ, std::size_t from, std::size_t to) {
  std::vector<char> seen(succ.size(), 0);
  std::vector<std::size_t> stack{from};
  while (!stack.empty()) {
    std::size_t n = stack.back();
    stack.pop_back();
    if (n == to) return true;
    if (seen[n]) continue;
    seen[n] = 1;
    for (std::size_t s : succ[n]) {
      if (!seen[s]) stack.push_back(s);
    }
  }
  return false;
}

// Successor lists in reverse topological order.
std::vector<std::size_t> reverse_topological(const WorkflowDag& dag) {
  const std::size_t n = dag.size();
  std::vector<std::size_t> indegree(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s : dag.successor_indices(i)) ++indegree[s];
  }
  std::vector<std::size_t> order;
  order.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) order.push_back(i);
  }
  for (std::size_t head = 0; head < order.size(); ++head) {
    for (std::size_t s : dag.successor_indices(order[head])) {
      if (--indegree[s] == 0) order.push_back(s);
    }
  }
  if (order.size() != n) throw CwsError(ErrorCode::kInternal, "physical DAG contains a cycle");
  std::reverse(order.begin(), order.end());
  return order;
}

}  // namespace

std::string_view to_string(TaskState state) { return kStateNames[static_cast<std::size_t>(state)]; }

TaskState task_state_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kStateNames.size(); ++i) {
    if (kStateNames[i] == name) return static_cast<TaskState>(i);
  }
  throw CwsError(ErrorCode::kValidation, "unknown task state '" + std::string(name) + "'");
}

WorkflowDag::WorkflowDag(std::string workflow_id) : workflow_id_(std::move(workflow_id)) {
  if (workflow_id_.empty()) throw CwsError(ErrorCode::kValidation, "workflow_id must be non-empty");
}

bool WorkflowDag::contains(std::string_view task_id) const {
  return index_.count(std::string(task_id)) != 0;
}

std::size_t WorkflowDag::index_of(const std::string& task_id) const {
  auto it = index_.find(task_id);
  if (it == index_.end()) {
    throw CwsError(ErrorCode::kNotFound, "unknown task '" + task_id + "'", {task_id});
  }
  return it->second;
}

bool WorkflowDag::all_predecessors_succeeded(std::size_t index) const {
  return std::all_of(nodes_[index].pred.begin(), nodes_[index].pred.end(),
                     [&](std::size_t p) { return nodes_[p].state == TaskState::kSucceeded; });
}

std::vector<std::string> WorkflowDag::add_tasks(const std::vector<TaskSpec>& batch) {
  std::vector<std::string> diagnostics;
  std::unordered_map<std::string, std::size_t> batch_index;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& spec = batch[i];
    try {
      validate(spec);
    } catch (const CwsError& e) {
      diagnostics.push_back(e.what());
      continue;
    }
    if (index_.count(spec.task_id) || !batch_index.emplace(spec.task_id, nodes_.size() + i).second) {
      diagnostics.push_back("task '" + spec.task_id + "': duplicate task_id");
    }
  }
  for (const auto& spec : batch) {
    for (const auto& dep : spec.depends_on) {
      if (!index_.count(dep) && !batch_index.count(dep)) {
        diagnostics.push_back("task '" + spec.task_id + "': unknown dependency '" + dep + "'");
      }
    }
  }
  if (!diagnostics.empty()) {
    throw CwsError(ErrorCode::kValidation, "task batch rejected", std::move(diagnostics));
  }

  // Cycle check on the combined graph before touching any state.
  std::vector<std::vector<std::size_t>> succ(nodes_.size() + batch.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) succ[i] = nodes_[i].succ;
  auto resolve = [&](const std::string& id) {
    auto it = index_.find(id);
    return it != index_.end() ? it->second : batch_index.at(id);
  };
  std::vector<Edge> offending;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::size_t to = nodes_.size() + i;
    for (const auto& dep : batch[i].depends_on) {
      const std::size_t from = resolve(dep);
      if (reaches(succ, to, from)) {
        offending.emplace_back(dep, batch[i].task_id);
        continue;
      }
      succ[from].push_back(to);
    }
  }
  if (!offending.empty()) {
    std::vector<std::string> names;
    for (const auto& e : offending) names.push_back(edge_name(e));
    throw CwsError(ErrorCode::kCycle, "task batch introduces a dependency cycle", std::move(names));
  }

  const std::size_t base = nodes_.size();
  for (const auto& spec : batch) {
    index_.emplace(spec.task_id, nodes_.size());
    nodes_.push_back(Node{spec, TaskState::kSubmitted, {}, {}});
  }
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::size_t to = base + i;
    for (const auto& dep : batch[i].depends_on) {
      const std::size_t from = index_.at(dep);
      nodes_[from].succ.push_back(to);
      nodes_[to].pred.push_back(from);
      physical_edges_.emplace(dep, batch[i].task_id);
    }
  }
  std::vector<std::string> ready;
  for (std::size_t i = base; i < nodes_.size(); ++i) {
    if (all_predecessors_succeeded(i)) {
      nodes_[i].state = TaskState::kReady;
      ready.push_back(nodes_[i].spec.task_id);
    }
  }
  return ready;
}

void WorkflowDag::add_edges(const std::vector<Edge>& edges) {
  std::vector<std::string> diagnostics;
  for (const auto& [from, to] : edges) {
    if (!index_.count(from)) diagnostics.push_back("unknown task '" + from + "'");
    if (!index_.count(to)) diagnostics.push_back("unknown task '" + to + "'");
    if (from == to) diagnostics.push_back("self edge " + edge_name({from, to}));
  }
  if (!diagnostics.empty()) {
    throw CwsError(ErrorCode::kValidation, "edge patch rejected", std::move(diagnostics));
  }

  std::vector<std::vector<std::size_t>> succ(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) succ[i] = nodes_[i].succ;
  std::vector<Edge> offending;
  std::vector<std::pair<std::size_t, std::size_t>> fresh;
  for (const auto& e : edges) {
    if (physical_edges_.count(e)) continue;
    const std::size_t from = index_.at(e.first);
    const std::size_t to = index_.at(e.second);
    if (std::find(fresh.begin(), fresh.end(), std::make_pair(from, to)) != fresh.end()) continue;
    if (reaches(succ, to, from)) {
      offending.push_back(e);
      continue;
    }
    const TaskState target = nodes_[to].state;
    if (nodes_[from].state != TaskState::kSucceeded && target != TaskState::kSubmitted &&
        target != TaskState::kReady) {
      diagnostics.push_back("cannot block task '" + e.second + "' in state " +
                            std::string(to_string(target)));
      continue;
    }
    succ[from].push_back(to);
    fresh.emplace_back(from, to);
  }
  if (!offending.empty()) {
    std::vector<std::string> names;
    for (const auto& e : offending) names.push_back(edge_name(e));
    throw CwsError(ErrorCode::kCycle, "edge patch introduces a dependency cycle", std::move(names));
  }
  if (!diagnostics.empty()) {
    throw CwsError(ErrorCode::kValidation, "edge patch rejected", std::move(diagnostics));
  }
  for (const auto& [from, to] : fresh) {
    nodes_[from].succ.push_back(to);
    nodes_[to].pred.push_back(from);
    physical_edges_.emplace(nodes_[from].spec.task_id, nodes_[to].spec.task_id);
    if (nodes_[to].state == TaskState::kReady && !all_predecessors_succeeded(to)) {
      nodes_[to].state = TaskState::kSubmitted;
    }
  }
}

void WorkflowDag::add_abstract_edges(const std::vector<Edge>& edges) {
  for (const auto& e : edges) {
    if (e.first.empty() || e.second.empty()) {
      throw CwsError(ErrorCode::kValidation, "abstract edge with empty process name");
    }
  }
  abstract_edges_.insert(edges.begin(), edges.end());
}

void WorkflowDag::mark_assigned(const std::string& task_id) {
  Node& n = nodes_[index_of(task_id)];
  if (n.state != TaskState::kReady) {
    throw CwsError(ErrorCode::kIllegalTransition, "task '" + task_id + "' is " +
                                                      std::string(to_string(n.state)) +
                                                      ", cannot become ASSIGNED");
  }
  n.state = TaskState::kAssigned;
}

void WorkflowDag::mark_running(const std::string& task_id) {
  Node& n = nodes_[index_of(task_id)];
  if (n.state != TaskState::kAssigned) {
    throw CwsError(ErrorCode::kIllegalTransition, "task '" + task_id + "' is " +
                                                      std::string(to_string(n.state)) +
                                                      ", cannot become RUNNING");
  }
  n.state = TaskState::kRunning;
}

std::vector<std::string> WorkflowDag::mark_finished(const std::string& task_id, TaskState outcome) {
  const std::size_t idx = index_of(task_id);
  Node& n = nodes_[idx];
  if (outcome != TaskState::kSucceeded && outcome != TaskState::kFailed) {
    throw CwsError(ErrorCode::kIllegalTransition, "finish outcome must be SUCCEEDED or FAILED");
  }
  if (n.state != TaskState::kRunning && n.state != TaskState::kAssigned) {
    throw CwsError(ErrorCode::kIllegalTransition, "task '" + task_id + "' is " +
                                                      std::string(to_string(n.state)) + ", cannot become " +
                                                      std::string(to_string(outcome)));
  }
  n.state = outcome;
  std::vector<std::string> released;
  if (outcome != TaskState::kSucceeded) return released;
  for (std::size_t s : n.succ) {
    if (nodes_[s].state == TaskState::kSubmitted && all_predecessors_succeeded(s)) {
      nodes_[s].state = TaskState::kReady;
      released.push_back(nodes_[s].spec.task_id);
    }
  }
  return released;
}

void WorkflowDag::requeue(const std::string& task_id) {
  Node& n = nodes_[index_of(task_id)];
  if (n.state != TaskState::kFailed) {
    throw CwsError(ErrorCode::kIllegalTransition, "only FAILED tasks can be requeued");
  }
  n.state = TaskState::kReady;
}

TaskState WorkflowDag::state(const std::string& task_id) const { return nodes_[index_of(task_id)].state; }

const TaskSpec& WorkflowDag::task(const std::string& task_id) const { return nodes_[index_of(task_id)].spec; }

std::size_t WorkflowDag::submission_index(const std::string& task_id) const { return index_of(task_id); }

std::vector<std::string> WorkflowDag::task_ids() const {
  std::vector<std::string> ids;
  ids.reserve(nodes_.size());
  for (const auto& n : nodes_) ids.push_back(n.spec.task_id);
  return ids;
}

std::vector<std::string> WorkflowDag::tasks_in_state(TaskState state) const {
  std::vector<std::string> ids;
  for (const auto& n : nodes_) {
    if (n.state == state) ids.push_back(n.spec.task_id);
  }
  return ids;
}

std::vector<std::string> WorkflowDag::successors(const std::string& task_id) const {
  std::vector<std::string> ids;
  for (std::size_t s : nodes_[index_of(task_id)].succ) ids.push_back(nodes_[s].spec.task_id);
  return ids;
}

std::vector<std::string> WorkflowDag::predecessors(const std::string& task_id) const {
  std::vector<std::string> ids;
  for (std::size_t p : nodes_[index_of(task_id)].pred) ids.push_back(nodes_[p].spec.task_id);
  return ids;
}

RankTable compute_ranks(const WorkflowDag& dag) {
  std::vector<int> rank(dag.size(), 0);
  for (std::size_t i : reverse_topological(dag)) {
    for (std::size_t s : dag.successor_indices(i)) rank[i] = std::max(rank[i], rank[s] + 1);
  }
  RankTable table;
  table.reserve(dag.size());
  for (std::size_t i = 0; i < dag.size(); ++i) table.emplace(dag.id_at(i), rank[i]);
  return table;
}

std::unordered_map<std::string, double> weighted_ranks(
    const WorkflowDag& dag, const std::unordered_map<std::string, double>& estimates) {
  std::vector<double> weight(dag.size());
  for (std::size_t i = 0; i < dag.size(); ++i) {
    auto it = estimates.find(dag.id_at(i));
    if (it == estimates.end()) {
      throw CwsError(ErrorCode::kValidation, "missing runtime estimate for task '" + dag.id_at(i) + "'",
                     {dag.id_at(i)});
    }
    if (!(it->second > 0)) {
      throw CwsError(ErrorCode::kValidation,
                     "runtime estimate for task '" + dag.id_at(i) + "' must be positive", {dag.id_at(i)});
    }
    weight[i] = it->second;
  }
  std::vector<double> wrank(dag.size(), 0.0);
  for (std::size_t i : reverse_topological(dag)) {
    double best = 0;
    for (std::size_t s : dag.successor_indices(i)) best = std::max(best, wrank[s]);
    wrank[i] = weight[i] + best;
  }
  std::unordered_map<std::string, double> out;
  out.reserve(dag.size());
  for (std::size_t i = 0; i < dag.size(); ++i) out.emplace(dag.id_at(i), wrank[i]);
  return out;
}

}  // namespace cws

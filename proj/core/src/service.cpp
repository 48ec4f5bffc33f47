#include "cws/service.hpp"

#include <algorithm>

#include "cws/error.hpp"

namespace cws {

using protocol::Json;

CwsService::CwsService(ClusterDef cluster, ServiceConfig config, Clock clock,
                       std::shared_ptr<ProvenanceStore> store)
    : config_(std::move(config)),
      cluster_(std::move(cluster)),
      clock_(clock ? std::move(clock) : Clock(&Timestamp::wall_now)),
      store_(store ? std::move(store) : std::make_shared<ProvenanceStore>()),
      runtime_(config_.predictor),
      memory_(config_.memory) {
  validate(cluster_);
  nodes_ = cluster_.initial_states();
  for (const auto& n : nodes_) runtime_.set_node_factor(n.node_id, boost::rational_cast<double>(n.factor()));
  memory_.set_max_node_capacity(cluster_.max_memory());
}

CwsService::~CwsService() { shutdown(); }

void CwsService::shutdown() {
  shutting_down_ = true;
  std::vector<std::shared_ptr<Workflow>> all;
  {
    std::shared_lock lock(workflows_mutex_);
    for (const auto& [_, wf] : workflows_) all.push_back(wf);
  }
  for (const auto& wf : all) {
    std::lock_guard lock(wf->mutex);
    wf->changed.notify_all();
  }
}

std::shared_ptr<CwsService::Workflow> CwsService::find(const std::string& workflow_id) const {
  std::shared_lock lock(workflows_mutex_);
  auto it = workflows_.find(workflow_id);
  if (it == workflows_.end()) {
    throw CwsError(ErrorCode::kNotFound, "unknown workflow '" + workflow_id + "'", {workflow_id});
  }
  return it->second;
}

std::string CwsService::predictor_key(const Workflow& wf, const std::string& process_name) const {
  if (config_.predictor.share_across_workflows) return process_name;
  return wf.id + "/" + process_name;
}

void CwsService::record(const Workflow& wf, const std::string& task_id, EventKind kind, Json payload) const {
  TraceRecord r;
  r.timestamp = clock_();
  r.workflow_id = wf.id;
  r.task_id = task_id;
  if (!task_id.empty() && wf.dag.contains(task_id)) r.process_name = wf.dag.task(task_id).process_name;
  r.event_kind = kind;
  r.payload = std::move(payload);
  store_->append(std::move(r));
}

namespace {

void ensure_open(bool closed, const std::string& id) {
  if (closed) throw CwsError(ErrorCode::kConflict, "workflow '" + id + "' is closed", {id});
}

}  // namespace

protocol::RegisterResponse CwsService::register_workflow(const protocol::RegisterRequest& request) {
  if (request.workflow_id.empty()) throw CwsError(ErrorCode::kValidation, "workflow_id must be non-empty");
  const auto strategy = strategy_from_string(request.strategy);
  if (!strategy) {
    throw CwsError(ErrorCode::kUnknownStrategy, "unknown strategy '" + request.strategy + "'", strategy_names());
  }
  auto wf = std::make_shared<Workflow>(request.workflow_id);
  wf->strategy = *strategy;
  wf->engine_name = request.engine_name;
  wf->dag.add_abstract_edges(request.dag_hint);
  {
    std::unique_lock lock(workflows_mutex_);
    if (workflows_.count(request.workflow_id)) {
      throw CwsError(ErrorCode::kConflict, "workflow '" + request.workflow_id + "' already registered",
                     {request.workflow_id});
    }
    workflows_.emplace(request.workflow_id, wf);
    registration_order_.push_back(request.workflow_id);
  }
  Json hint = Json::array();
  for (const auto& [from, to] : request.dag_hint) hint.push_back(Json{{"from", from}, {"to", to}});
  record(*wf, "", EventKind::kRegistered,
         Json{{"strategy", request.strategy}, {"engine_name", request.engine_name}, {"dag_hint", hint}});
  return {request.workflow_id, request.strategy};
}

Bytes CwsService::host_limit(MilliCores cpu) const {
  Bytes limit = 0;
  for (const auto& n : cluster_.nodes) {
    if (n.cpu >= cpu) limit = std::max(limit, n.memory_bytes);
  }
  return limit;
}

void CwsService::on_ready(Workflow& wf, const std::vector<std::string>& ready) {
  for (const auto& id : ready) {
    auto& rt = wf.runtime[id];
    if (rt.allocation == 0) {
      const auto& spec = wf.dag.task(id);
      rt.allocation = memory_.initial_allocation(predictor_key(wf, spec.process_name), spec.memory_request_bytes,
                                                 host_limit(spec.cpu_request));
    }
    record(wf, id, EventKind::kReady, Json{{"memory_allocation_bytes", rt.allocation}});
  }
}

std::size_t CwsService::submit_tasks(const std::string& workflow_id, const std::vector<TaskSpec>& batch) {
  auto wf = find(workflow_id);
  {
    std::lock_guard lock(wf->mutex);
    ensure_open(wf->closed, workflow_id);
    if (batch.empty()) return 0;
    const auto ready = wf->dag.add_tasks(batch);
    for (const auto& spec : batch) {
      wf->runtime.emplace(spec.task_id, TaskRuntime{});
      record(*wf, spec.task_id, EventKind::kSubmitted, Json{{"task", protocol::encode(spec)}});
    }
    on_ready(*wf, ready);
    schedule_tick(*wf);
  }
  return batch.size();
}

void CwsService::push_dag_edges(const std::string& workflow_id, const protocol::DagPatch& patch) {
  auto wf = find(workflow_id);
  std::lock_guard lock(wf->mutex);
  ensure_open(wf->closed, workflow_id);
  // Validate the advisory edges first so a rejected patch changes nothing.
  for (const auto& e : patch.abstract_edges) {
    if (e.first.empty() || e.second.empty()) {
      throw CwsError(ErrorCode::kValidation, "abstract edge with empty process name");
    }
  }
  wf->dag.add_edges(patch.physical_edges);
  wf->dag.add_abstract_edges(patch.abstract_edges);
  schedule_tick(*wf);
}

protocol::AssignmentResponse CwsService::fetch_assignments(const std::string& workflow_id, std::int64_t after,
                                                           bool wait,
                                                           std::optional<std::chrono::milliseconds> timeout) {
  auto wf = find(workflow_id);
  std::unique_lock lock(wf->mutex);
  const auto available = [&] { return static_cast<std::int64_t>(wf->decisions.size()) > after; };
  if (wait && !available()) {
    const auto limit = timeout.value_or(std::chrono::milliseconds(config_.poll_timeout_ms));
    wf->changed.wait_for(lock, limit, [&] { return available() || wf->closed || shutting_down_.load(); });
  }
  protocol::AssignmentResponse response{workflow_id, {}};
  const auto start = static_cast<std::size_t>(std::max<std::int64_t>(after, 0));
  for (std::size_t i = start; i < wf->decisions.size(); ++i) response.assignments.push_back(wf->decisions[i]);
  return response;
}

void CwsService::release(Workflow& wf, const std::string& task_id) {
  auto& rt = wf.runtime.at(task_id);
  if (!rt.node_id) return;
  const auto& spec = wf.dag.task(task_id);
  std::lock_guard lock(nodes_mutex_);
  for (auto& n : nodes_) {
    if (n.node_id == *rt.node_id) {
      n.cpu_free += spec.cpu_request;
      n.memory_free += rt.allocation;
    }
  }
  rt.node_id.reset();
}

protocol::StatusAck CwsService::report_status(const std::string& workflow_id,
                                              const protocol::StatusReport& report) {
  auto wf = find(workflow_id);
  protocol::StatusAck ack;
  bool capacity_released = false;
  {
    std::lock_guard lock(wf->mutex);
    ensure_open(wf->closed, workflow_id);
    const TaskState current = wf->dag.state(report.task_id);
    auto& rt = wf->runtime.at(report.task_id);
    const std::string node_id = rt.node_id.value_or("");

    switch (report.new_state) {
      case TaskState::kRunning: {
        wf->dag.mark_running(report.task_id);
        record(*wf, report.task_id, EventKind::kStarted, Json{{"node_id", node_id}});
        return ack;
      }
      case TaskState::kSucceeded: {
        if (!report.metrics) {
          throw CwsError(ErrorCode::kValidation, "metrics are required when reporting SUCCEEDED", {report.task_id});
        }
        const auto released = wf->dag.mark_finished(report.task_id, TaskState::kSucceeded);
        const auto& spec = wf->dag.task(report.task_id);
        const auto& m = *report.metrics;
        record(*wf, report.task_id, EventKind::kSucceeded,
               Json{{"node_id", node_id},
                    {"memory_allocation_bytes", rt.allocation},
                    {"metrics", Json{{"wall_time_s", m.wall_time_s},
                                     {"peak_memory_bytes", m.peak_memory_bytes},
                                     {"input_bytes_total", m.input_bytes_total}}}});
        const std::string key = predictor_key(*wf, spec.process_name);
        if (m.wall_time_s > 0 && !node_id.empty()) {
          runtime_.observe_runtime(key, m.input_bytes_total, node_id, m.wall_time_s);
        }
        if (m.peak_memory_bytes > 0) memory_.observe_peak(key, m.peak_memory_bytes);
        {
          std::lock_guard nodes_lock(nodes_mutex_);
          for (auto& n : nodes_) {
            if (n.node_id != node_id) continue;
            for (const auto& f : spec.input_files) n.stored_files.insert(f.path);
            for (const auto& f : report.output_files) n.stored_files.insert(f.path);
          }
        }
        release(*wf, report.task_id);
        capacity_released = true;
        on_ready(*wf, released);
        break;
      }
      case TaskState::kFailed: {
        wf->dag.mark_finished(report.task_id, TaskState::kFailed);
        release(*wf, report.task_id);
        capacity_released = true;
        const auto kind = report.failure_kind.value_or(protocol::FailureKind::kError);
        Json payload{{"node_id", node_id},
                     {"failure_kind", protocol::to_string(kind)},
                     {"memory_allocation_bytes", rt.allocation}};
        if (report.metrics) {
          payload["metrics"] = Json{{"wall_time_s", report.metrics->wall_time_s},
                                    {"peak_memory_bytes", report.metrics->peak_memory_bytes},
                                    {"input_bytes_total", report.metrics->input_bytes_total}};
        }
        if (kind == protocol::FailureKind::kOom) {
          const auto& spec = wf->dag.task(report.task_id);
          ++rt.oom_count;
          const auto decision =
              memory_.on_oom(predictor_key(*wf, spec.process_name), rt.allocation, rt.oom_count,
                             host_limit(spec.cpu_request));
          payload["permanent"] = decision.permanent_failure;
          record(*wf, report.task_id, EventKind::kFailed, std::move(payload));
          if (decision.permanent_failure) {
            ack.permanent_failure = true;
            ack.diagnostic = decision.diagnostic;
          } else {
            rt.allocation = decision.new_allocation_bytes;
            wf->dag.requeue(report.task_id);
            record(*wf, report.task_id, EventKind::kResubmitted,
                   Json{{"memory_allocation_bytes", rt.allocation}, {"attempt", rt.oom_count + 1}});
            on_ready(*wf, {report.task_id});
            ack.retry_scheduled = true;
            ack.memory_allocation_bytes = rt.allocation;
          }
        } else {
          payload["permanent"] = true;
          record(*wf, report.task_id, EventKind::kFailed, std::move(payload));
          ack.permanent_failure = true;
          ack.diagnostic = "task reported an error; resubmit under a new task_id to retry";
        }
        break;
      }
      default:
        throw CwsError(ErrorCode::kIllegalTransition,
                       "cannot report state " + std::string(to_string(report.new_state)) + " (task is " +
                           std::string(to_string(current)) + ")",
                       {report.task_id});
    }
    schedule_tick(*wf);
  }
  if (capacity_released) tick_others(*wf);
  return ack;
}

std::size_t CwsService::schedule_tick(Workflow& wf) {
  if (wf.closed) return 0;
  const auto ready = wf.dag.tasks_in_state(TaskState::kReady);
  if (ready.empty()) return 0;

  const RankTable ranks = compute_ranks(wf.dag);
  std::optional<std::unordered_map<std::string, double>> wranks;
  if (wf.strategy == StrategyName::kWrankRr) {
    std::unordered_map<std::string, double> estimates;
    for (const auto& id : wf.dag.task_ids()) {
      const auto& spec = wf.dag.task(id);
      estimates[id] =
          runtime_.predict_reference(predictor_key(wf, spec.process_name), spec.input_bytes_total()).mean_s;
    }
    wranks = weighted_ranks(wf.dag, estimates);
  }
  const auto ordered = prioritize(wf.strategy, ready, wf.dag, ranks, wranks ? &*wranks : nullptr);

  std::vector<PendingTask> pending;
  pending.reserve(ordered.size());
  for (const auto& id : ordered) {
    const auto& spec = wf.dag.task(id);
    pending.push_back(PendingTask{id, spec.process_name, spec.cpu_request, wf.runtime.at(id).allocation,
                                  spec.input_files});
  }

  std::vector<Assignment> placed;
  if (wf.strategy == StrategyName::kGroupMatch) {
    std::unordered_map<std::string, std::vector<double>> peaks;
    TraceFilter filter;
    filter.event_kind = EventKind::kSucceeded;
    if (!config_.predictor.share_across_workflows) filter.workflow_id = wf.id;
    for (const auto& r : store_->query(filter)) {
      peaks[r.process_name].push_back(r.payload.at("metrics").at("peak_memory_bytes").get<double>());
    }
    std::unordered_map<std::string, double> medians;
    for (auto& [process, values] : peaks) medians[process] = median(std::move(values));
    std::lock_guard lock(nodes_mutex_);
    placed = place_group_match(pending, nodes_, medians, wf.group_cursors, config_.group_match_max_groups);
  } else {
    std::lock_guard lock(nodes_mutex_);
    placed = place_round_robin(pending, nodes_, wf.cursor, wf.strategy == StrategyName::kFifo);
  }

  for (auto& a : placed) {
    a.sequence_number = static_cast<std::int64_t>(wf.decisions.size()) + 1;
    wf.dag.mark_assigned(a.task_id);
    wf.runtime.at(a.task_id).node_id = a.node_id;
    Json decision{{"strategy", to_string(wf.strategy)},
                  {"rank", ranks.at(a.task_id)},
                  {"node_id", a.node_id},
                  {"memory_allocation_bytes", a.memory_allocation_bytes},
                  {"sequence_number", a.sequence_number}};
    if (wranks) decision["weighted_rank"] = wranks->at(a.task_id);
    record(wf, a.task_id, EventKind::kDecision, std::move(decision));
    record(wf, a.task_id, EventKind::kAssigned,
           Json{{"node_id", a.node_id},
                {"memory_allocation_bytes", a.memory_allocation_bytes},
                {"sequence_number", a.sequence_number}});
    wf.decisions.push_back(a);
  }
  if (!placed.empty()) wf.changed.notify_all();
  return placed.size();
}

void CwsService::tick_others(const Workflow& except) {
  std::vector<std::shared_ptr<Workflow>> others;
  {
    std::shared_lock lock(workflows_mutex_);
    for (const auto& id : registration_order_) {
      if (id != except.id) others.push_back(workflows_.at(id));
    }
  }
  for (const auto& wf : others) {
    std::lock_guard lock(wf->mutex);
    schedule_tick(*wf);
  }
}

protocol::WorkflowSummary CwsService::close_workflow(const std::string& workflow_id) {
  auto wf = find(workflow_id);
  std::lock_guard lock(wf->mutex);
  ensure_open(wf->closed, workflow_id);
  std::vector<std::string> in_flight;
  for (const auto& id : wf->dag.task_ids()) {
    const TaskState s = wf->dag.state(id);
    if (s == TaskState::kRunning || s == TaskState::kAssigned) in_flight.push_back(id);
  }
  if (!in_flight.empty()) {
    throw CwsError(ErrorCode::kConflict, "workflow '" + workflow_id + "' still has running tasks", in_flight);
  }

  protocol::WorkflowSummary summary;
  summary.workflow_id = workflow_id;
  for (auto s : {TaskState::kSubmitted, TaskState::kReady, TaskState::kAssigned, TaskState::kRunning,
                 TaskState::kSucceeded, TaskState::kFailed}) {
    summary.task_counts[std::string(to_string(s))] = 0;
  }
  for (const auto& id : wf->dag.task_ids()) ++summary.task_counts[std::string(to_string(wf->dag.state(id)))];

  TraceFilter filter;
  filter.workflow_id = workflow_id;
  std::optional<Seconds> first, last;
  for (const auto& r : store_->query(filter)) {
    if (r.event_kind == EventKind::kStarted && (!first || r.timestamp.seconds < *first)) first = r.timestamp.seconds;
    if ((r.event_kind == EventKind::kSucceeded || r.event_kind == EventKind::kFailed) &&
        (!last || r.timestamp.seconds > *last)) {
      last = r.timestamp.seconds;
    }
  }
  if (first && last && *last > *first) summary.makespan_s = to_double(*last - *first);

  wf->closed = true;
  wf->summary = summary;
  wf->dag = WorkflowDag(workflow_id);
  wf->runtime.clear();
  wf->changed.notify_all();
  return summary;
}

std::map<std::string, WastageEntry> CwsService::wastage_report(const std::string& workflow_id) const {
  auto wf = find(workflow_id);
  {
    std::lock_guard lock(wf->mutex);
    if (!wf->closed) {
      throw CwsError(ErrorCode::kConflict, "wastage report requires a closed workflow", {workflow_id});
    }
  }
  TraceFilter filter;
  filter.workflow_id = workflow_id;
  std::unordered_map<std::string, Bytes> allocation;
  std::vector<AttemptUsage> attempts;
  for (const auto& r : store_->query(filter)) {
    if (r.event_kind == EventKind::kAssigned) {
      allocation[r.task_id] = r.payload.at("memory_allocation_bytes").get<Bytes>();
    } else if ((r.event_kind == EventKind::kSucceeded || r.event_kind == EventKind::kFailed) &&
               r.payload.contains("metrics")) {
      const auto& m = r.payload.at("metrics");
      attempts.push_back(AttemptUsage{r.process_name, allocation[r.task_id], m.at("peak_memory_bytes").get<Bytes>(),
                                      m.at("wall_time_s").get<double>()});
    }
  }
  return wastage_from_attempts(attempts);
}

std::vector<NodeState> CwsService::nodes() const {
  std::lock_guard lock(nodes_mutex_);
  return nodes_;
}

WorkflowDag CwsService::snapshot(const std::string& workflow_id) const {
  auto wf = find(workflow_id);
  std::lock_guard lock(wf->mutex);
  return wf->dag;
}

std::vector<Assignment> CwsService::decision_log(const std::string& workflow_id) const {
  auto wf = find(workflow_id);
  std::lock_guard lock(wf->mutex);
  return wf->decisions;
}

bool CwsService::is_closed(const std::string& workflow_id) const {
  auto wf = find(workflow_id);
  std::lock_guard lock(wf->mutex);
  return wf->closed;
}

}  // namespace cws

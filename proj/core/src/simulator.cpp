#include "cws/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cws/error.hpp"
#include "cws/service.hpp"

namespace cws {
namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::string_view to_string(SimEventKind kind) {
  switch (kind) {
    case SimEventKind::kTaskFinish: return "FINISH";
    case SimEventKind::kTaskOom: return "OOM";
    case SimEventKind::kTaskStart: return "START";
  }
  return "START";
}

bool SimEventAfter::operator()(const SimEvent& a, const SimEvent& b) const {
  if (a.time != b.time) return a.time > b.time;
  if (a.kind != b.kind) return a.kind > b.kind;
  return a.task_id > b.task_id;
}

std::string format_event(const SimEvent& e) {
  return to_string(e.time) + " " + std::string(to_string(e.kind)) + " " + e.task_id + " " + e.node_id;
}

std::string SimResult::event_log() const {
  std::string out;
  for (const auto& e : events) out += format_event(e) + "\n";
  return out;
}

std::vector<std::string> replay_ledger(const ClusterDef& cluster, const std::vector<LedgerEntry>& ledger) {
  std::map<std::string, std::pair<MilliCores, Bytes>> free;
  for (const auto& n : cluster.nodes) free[n.node_id] = {n.cpu, n.memory_bytes};
  std::vector<std::string> violations;
  for (std::size_t i = 0; i < ledger.size(); ++i) {
    const auto& e = ledger[i];
    auto it = free.find(e.node_id);
    if (it == free.end()) {
      violations.push_back("entry " + std::to_string(i) + ": unknown node " + e.node_id);
      continue;
    }
    auto& [cpu, memory] = it->second;
    if (e.kind == LedgerEntry::Kind::kAssign) {
      cpu = cpu - e.cpu;
      memory -= e.memory;
    } else {
      cpu = cpu + e.cpu;
      memory += e.memory;
    }
    if (cpu.value < 0 || memory < 0) {
      violations.push_back("entry " + std::to_string(i) + ": node " + e.node_id + " overbooked by " + e.task_id +
                           " (cpu free " + std::to_string(cpu.value) + "m, memory free " +
                           std::to_string(memory) + ")");
    }
  }
  return violations;
}

Simulator::Simulator(ClusterDef cluster, WorkloadDef workload, CwsiClient& client, std::string strategy,
                     SimOptions options, std::shared_ptr<Seconds> clock)
    : cluster_(std::move(cluster)),
      workload_(std::move(workload)),
      client_(client),
      strategy_(std::move(strategy)),
      options_(std::move(options)),
      clock_(clock ? std::move(clock) : std::make_shared<Seconds>(0)) {
  validate(cluster_);
  validate(workload_);
  workflow_id_ = options_.workflow_id.empty() ? workload_.name : options_.workflow_id;
  rng_state_ = options_.seed.value_or(cluster_.seed);
  *clock_ = now_;
  for (std::size_t i = 0; i < workload_.tasks.size(); ++i) {
    const auto& id = workload_.tasks[i].spec.task_id;
    order_[id] = i;
    traces_[id].task_id = id;
  }
}

const NodeDef& Simulator::node(const std::string& node_id) const {
  for (const auto& n : cluster_.nodes) {
    if (n.node_id == node_id) return n;
  }
  throw CwsError(ErrorCode::kInternal, "scheduler assigned unknown node '" + node_id + "'");
}

Seconds Simulator::attempt_duration(const WorkloadTask& task, const NodeDef& n) {
  Seconds duration = task.truth.true_runtime_s / (n.bench_score / kReferenceBenchScore);
  if (options_.runtime_jitter > 0) {
    const double u = static_cast<double>(splitmix64(rng_state_) >> 11) * 0x1.0p-53;
    const double factor = 1.0 + options_.runtime_jitter * (2.0 * u - 1.0);
    duration *= Seconds(std::max<std::int64_t>(1, std::llround(factor * 1000.0)), 1000);
  }
  return duration;
}

void Simulator::start() {
  if (started_) throw CwsError(ErrorCode::kInternal, "simulation already started");
  started_ = true;

  protocol::RegisterRequest request;
  request.workflow_id = workflow_id_;
  request.strategy = strategy_;
  request.engine_name = "cws-sim";
  if (workload_.reveal_mode == RevealMode::kIncremental) {
    std::set<Edge> abstract;
    for (const auto& t : workload_.tasks) {
      for (const auto& dep : t.spec.depends_on) {
        abstract.emplace(workload_.task(dep).spec.process_name, t.spec.process_name);
      }
    }
    request.dag_hint.assign(abstract.begin(), abstract.end());
  }
  client_.register_workflow(request);

  if (workload_.reveal_mode == RevealMode::kFullDag) {
    client_.submit_tasks(workflow_id_, workload_.specs());
    for (const auto& t : workload_.tasks) submitted_.insert(t.spec.task_id);
  } else {
    submit_newly_ready("");
  }
  fetch_and_start();
}

void Simulator::submit_newly_ready(const std::string&) {
  std::vector<TaskSpec> batch;
  for (const auto& t : workload_.tasks) {
    if (submitted_.count(t.spec.task_id)) continue;
    const bool inputs_exist = std::all_of(t.spec.depends_on.begin(), t.spec.depends_on.end(),
                                          [&](const std::string& d) { return succeeded_.count(d) > 0; });
    if (!inputs_exist) continue;
    batch.push_back(t.spec);
    submitted_.insert(t.spec.task_id);
  }
  if (!batch.empty()) client_.submit_tasks(workflow_id_, batch);
}

void Simulator::fetch_and_start() {
  const auto response = client_.fetch_assignments(workflow_id_, last_sequence_, false);
  for (const auto& a : response.assignments) {
    if (a.sequence_number != last_sequence_ + 1) {
      throw CwsError(ErrorCode::kInternal, "assignment sequence gap: expected " +
                                               std::to_string(last_sequence_ + 1) + ", got " +
                                               std::to_string(a.sequence_number));
    }
    last_sequence_ = a.sequence_number;
    const auto& spec = workload_.task(a.task_id).spec;
    node(a.node_id);
    result_.assignments.push_back(a);
    result_.ledger.push_back({LedgerEntry::Kind::kAssign, a.task_id, a.node_id, spec.cpu_request,
                              a.memory_allocation_bytes});
    running_[a.task_id] = Running{a.node_id, spec.cpu_request, a.memory_allocation_bytes, now_};
    queue_.push(SimEvent{now_, SimEventKind::kTaskStart, a.task_id, a.node_id});
  }
}

std::optional<SimEvent> Simulator::step() {
  if (!started_) start();
  if (queue_.empty()) return std::nullopt;
  const SimEvent event = queue_.top();
  queue_.pop();
  now_ = event.time;
  *clock_ = now_;
  result_.events.push_back(event);

  const auto& task = workload_.task(event.task_id);
  auto& trace = traces_.at(event.task_id);
  const Running slot = running_.at(event.task_id);

  switch (event.kind) {
    case SimEventKind::kTaskStart: {
      client_.report_status(workflow_id_, protocol::StatusReport{event.task_id, TaskState::kRunning, {}, {}, {}});
      if (!any_start_) {
        any_start_ = true;
        first_start_ = now_;
      }
      ++trace.attempts;
      trace.node_id = event.node_id;
      trace.start = now_;
      running_.at(event.task_id).started = now_;
      if (slot.allocation < task.truth.true_peak_memory_bytes) {
        queue_.push(SimEvent{now_ + options_.oom_delay, SimEventKind::kTaskOom, event.task_id, event.node_id});
      } else {
        queue_.push(SimEvent{now_ + attempt_duration(task, node(event.node_id)), SimEventKind::kTaskFinish,
                             event.task_id, event.node_id});
      }
      break;
    }
    case SimEventKind::kTaskFinish: {
      running_.erase(event.task_id);
      result_.ledger.push_back(
          {LedgerEntry::Kind::kRelease, event.task_id, slot.node_id, slot.cpu, slot.allocation});
      const double wall = to_double(now_ - slot.started);
      protocol::StatusReport report{event.task_id, TaskState::kSucceeded, std::nullopt,
                                    protocol::TaskMetrics{wall, task.truth.true_peak_memory_bytes,
                                                          task.spec.input_bytes_total()},
                                    task.truth.output_files};
      client_.report_status(workflow_id_, report);
      result_.attempts.push_back(
          AttemptUsage{task.spec.process_name, slot.allocation, task.truth.true_peak_memory_bytes, wall});
      succeeded_.insert(event.task_id);
      trace.finish = now_;
      trace.succeeded = true;
      if (workload_.reveal_mode == RevealMode::kIncremental) submit_newly_ready(event.task_id);
      break;
    }
    case SimEventKind::kTaskOom: {
      running_.erase(event.task_id);
      result_.ledger.push_back(
          {LedgerEntry::Kind::kRelease, event.task_id, slot.node_id, slot.cpu, slot.allocation});
      const double wall = to_double(now_ - slot.started);
      // The kill happens at the allocation limit, so that is the observed peak.
      protocol::StatusReport report{event.task_id, TaskState::kFailed, protocol::FailureKind::kOom,
                                    protocol::TaskMetrics{wall, slot.allocation, task.spec.input_bytes_total()},
                                    {}};
      const auto ack = client_.report_status(workflow_id_, report);
      result_.attempts.push_back(AttemptUsage{task.spec.process_name, slot.allocation, slot.allocation, wall});
      trace.finish = now_;
      if (ack.permanent_failure) failed_.insert(event.task_id);
      break;
    }
  }

  fetch_and_start();
  if (options_.check_capacity_every_step) result_.capacity_violations += capacity_check().size();
  return event;
}

std::vector<std::string> Simulator::capacity_check() const {
  std::map<std::string, std::pair<MilliCores, Bytes>> used;
  for (const auto& [_, r] : running_) {
    used[r.node_id].first = used[r.node_id].first + r.cpu;
    used[r.node_id].second += r.allocation;
  }
  for (const auto& [_, r] : injected_) {
    used[r.node_id].first = used[r.node_id].first + r.cpu;
    used[r.node_id].second += r.allocation;
  }
  std::vector<std::string> violations;
  for (const auto& n : cluster_.nodes) {
    const auto& [cpu, memory] = used[n.node_id];
    if (cpu > n.cpu || memory > n.memory_bytes) {
      violations.push_back("t=" + to_string(now_) + " node " + n.node_id + ": cpu " + std::to_string(cpu.value) +
                           "m of " + std::to_string(n.cpu.value) + "m, memory " + std::to_string(memory) + " of " +
                           std::to_string(n.memory_bytes));
    }
  }
  return violations;
}

void Simulator::inject_booking(const std::string& node_id, MilliCores cpu, Bytes memory) {
  node(node_id);
  injected_.emplace_back("<injected>", Running{node_id, cpu, memory, now_});
  result_.ledger.push_back({LedgerEntry::Kind::kAssign, "<injected>", node_id, cpu, memory});
}

SimResult Simulator::finish() {
  if (!started_) start();
  result_.summary = client_.close_workflow(workflow_id_);

  std::optional<Seconds> last_end;
  for (const auto& e : result_.events) {
    if (e.kind != SimEventKind::kTaskStart && (!last_end || e.time > *last_end)) last_end = e.time;
  }
  result_.makespan = (any_start_ && last_end) ? *last_end - first_start_ : Seconds(0);

  result_.tasks.clear();
  result_.tasks.reserve(workload_.tasks.size());
  for (const auto& t : workload_.tasks) result_.tasks.push_back(traces_.at(t.spec.task_id));
  result_.failed = failed_.size();
  result_.unfinished = 0;
  for (const auto& t : workload_.tasks) {
    const auto& id = t.spec.task_id;
    if (!succeeded_.count(id) && !failed_.count(id)) ++result_.unfinished;
  }
  result_.wastage = wastage_from_attempts(result_.attempts);
  return result_;
}

SimResult Simulator::run() {
  start();
  while (step()) {
  }
  return finish();
}

InProcessRun run_simulation(const ClusterDef& cluster, const WorkloadDef& workload, const std::string& strategy,
                            const SimOptions& options, const ServiceConfig& config) {
  auto clock = std::make_shared<Seconds>(0);
  auto store = std::make_shared<ProvenanceStore>();
  CwsService service(cluster, config, [clock] { return Timestamp::simulated(*clock); }, store);
  InProcessClient client(service);
  Simulator simulator(cluster, workload, client, strategy, options, clock);
  return InProcessRun{simulator.run(), store};
}

}  // namespace cws

#include "cws/protocol.hpp"

#include <cmath>

namespace cws::protocol {
namespace {

[[noreturn]] void bad(const std::string& what) { throw CwsError(ErrorCode::kValidation, what); }

const Json& field(const Json& j, std::string_view key) {
  if (!j.is_object()) bad("expected a JSON object");
  auto it = j.find(std::string(key));
  if (it == j.end()) bad("missing field '" + std::string(key) + "'");
  return *it;
}

const Json* optional_field(const Json& j, std::string_view key) {
  if (!j.is_object()) bad("expected a JSON object");
  auto it = j.find(std::string(key));
  if (it == j.end() || it->is_null()) return nullptr;
  return &*it;
}

std::string get_string(const Json& j, std::string_view key) {
  const Json& v = field(j, key);
  if (!v.is_string()) bad("field '" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

std::int64_t get_int(const Json& j, std::string_view key) {
  const Json& v = field(j, key);
  if (!v.is_number_integer()) bad("field '" + std::string(key) + "' must be an integer");
  return v.get<std::int64_t>();
}

double get_number(const Json& j, std::string_view key) {
  const Json& v = field(j, key);
  if (!v.is_number()) bad("field '" + std::string(key) + "' must be a number");
  return v.get<double>();
}

bool get_bool(const Json& j, std::string_view key) {
  const Json& v = field(j, key);
  if (!v.is_boolean()) bad("field '" + std::string(key) + "' must be a boolean");
  return v.get<bool>();
}

const Json& get_array(const Json& j, std::string_view key) {
  const Json& v = field(j, key);
  if (!v.is_array()) bad("field '" + std::string(key) + "' must be an array");
  return v;
}

Json encode_edges(const std::vector<Edge>& edges) {
  Json arr = Json::array();
  for (const auto& [from, to] : edges) arr.push_back(Json{{"from", from}, {"to", to}});
  return arr;
}

std::vector<Edge> decode_edges(const Json& arr) {
  if (!arr.is_array()) bad("edge list must be an array");
  std::vector<Edge> edges;
  for (const auto& e : arr) edges.emplace_back(get_string(e, "from"), get_string(e, "to"));
  return edges;
}

Json encode_files(const std::vector<InputFile>& files) {
  Json arr = Json::array();
  for (const auto& f : files) arr.push_back(Json{{"path", f.path}, {"size_bytes", f.size_bytes}});
  return arr;
}

std::vector<InputFile> decode_files(const Json& arr) {
  if (!arr.is_array()) bad("file list must be an array");
  std::vector<InputFile> files;
  for (const auto& f : arr) files.push_back({get_string(f, "path"), get_int(f, "size_bytes")});
  return files;
}

Json encode_metrics(const TaskMetrics& m) {
  return Json{{"wall_time_s", m.wall_time_s},
              {"peak_memory_bytes", m.peak_memory_bytes},
              {"input_bytes_total", m.input_bytes_total}};
}

}  // namespace

std::string_view to_string(FailureKind kind) { return kind == FailureKind::kOom ? "OOM" : "ERROR"; }

FailureKind failure_kind_from_string(std::string_view name) {
  if (name == "OOM") return FailureKind::kOom;
  if (name == "ERROR") return FailureKind::kError;
  bad("unknown failure_kind '" + std::string(name) + "'");
}

Json parse(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    bad("malformed JSON at byte " + std::to_string(e.byte));
  }
}

Json encode(const TaskSpec& spec) {
  Json j;
  j["task_id"] = spec.task_id;
  j["process_name"] = spec.process_name;
  j["cpu_request"] = spec.cpu_request.cores();
  j["memory_request_bytes"] = spec.memory_request_bytes;
  j["input_files"] = encode_files(spec.input_files);
  j["parameters"] = Json::object();
  for (const auto& [k, v] : spec.parameters) j["parameters"][k] = v;
  j["depends_on"] = spec.depends_on;
  return j;
}

TaskSpec decode_task(const Json& j) {
  TaskSpec spec;
  spec.task_id = get_string(j, "task_id");
  spec.process_name = get_string(j, "process_name");
  const double cpu = get_number(j, "cpu_request");
  if (!(cpu > 0)) bad("task '" + spec.task_id + "': cpu_request must be positive");
  spec.cpu_request = MilliCores::from_cores(cpu);
  if (spec.cpu_request.value <= 0) bad("task '" + spec.task_id + "': cpu_request below one millicore");
  spec.memory_request_bytes = get_int(j, "memory_request_bytes");
  if (const Json* files = optional_field(j, "input_files")) spec.input_files = decode_files(*files);
  if (const Json* params = optional_field(j, "parameters")) {
    if (!params->is_object()) bad("field 'parameters' must be an object");
    for (const auto& [k, v] : params->items()) {
      if (!v.is_string()) bad("parameter '" + k + "' must be a string");
      spec.parameters[k] = v.get<std::string>();
    }
  }
  if (const Json* deps = optional_field(j, "depends_on")) {
    if (!deps->is_array()) bad("field 'depends_on' must be an array");
    for (const auto& d : *deps) {
      if (!d.is_string()) bad("depends_on entries must be strings");
      spec.depends_on.push_back(d.get<std::string>());
    }
  }
  return spec;
}

Json encode(const RegisterRequest& m) {
  Json j;
  j["workflow_id"] = m.workflow_id;
  j["strategy"] = m.strategy;
  j["engine_name"] = m.engine_name;
  j["dag_hint"] = encode_edges(m.dag_hint);
  return j;
}

RegisterRequest decode_register_request(const Json& j) {
  RegisterRequest m;
  m.workflow_id = get_string(j, "workflow_id");
  m.strategy = get_string(j, "strategy");
  if (optional_field(j, "engine_name")) m.engine_name = get_string(j, "engine_name");
  if (const Json* hint = optional_field(j, "dag_hint")) m.dag_hint = decode_edges(*hint);
  return m;
}

Json encode(const RegisterResponse& m) { return Json{{"workflow_id", m.workflow_id}, {"strategy", m.strategy}}; }

RegisterResponse decode_register_response(const Json& j) {
  return {get_string(j, "workflow_id"), get_string(j, "strategy")};
}

Json encode(const SubmitRequest& m) {
  Json arr = Json::array();
  for (const auto& t : m.tasks) arr.push_back(encode(t));
  return Json{{"tasks", arr}};
}

SubmitRequest decode_submit_request(const Json& j) {
  SubmitRequest m;
  for (const auto& t : get_array(j, "tasks")) m.tasks.push_back(decode_task(t));
  return m;
}

Json encode(const SubmitResponse& m) { return Json{{"accepted", m.accepted}}; }

SubmitResponse decode_submit_response(const Json& j) {
  return {static_cast<std::size_t>(get_int(j, "accepted"))};
}

Json encode(const DagPatch& m) {
  return Json{{"physical_edges", encode_edges(m.physical_edges)},
              {"abstract_edges", encode_edges(m.abstract_edges)}};
}

DagPatch decode_dag_patch(const Json& j) {
  DagPatch m;
  if (const Json* p = optional_field(j, "physical_edges")) m.physical_edges = decode_edges(*p);
  if (const Json* a = optional_field(j, "abstract_edges")) m.abstract_edges = decode_edges(*a);
  return m;
}

Json encode(const Assignment& a) {
  return Json{{"task_id", a.task_id},
              {"node_id", a.node_id},
              {"memory_allocation_bytes", a.memory_allocation_bytes},
              {"sequence_number", a.sequence_number}};
}

Json encode(const AssignmentResponse& m) {
  Json arr = Json::array();
  for (const auto& a : m.assignments) arr.push_back(encode(a));
  return Json{{"workflow_id", m.workflow_id}, {"assignments", arr}};
}

AssignmentResponse decode_assignment_response(const Json& j) {
  AssignmentResponse m;
  m.workflow_id = get_string(j, "workflow_id");
  for (const auto& a : get_array(j, "assignments")) {
    m.assignments.push_back(Assignment{get_string(a, "task_id"), get_string(a, "node_id"),
                                       get_int(a, "memory_allocation_bytes"), get_int(a, "sequence_number")});
  }
  return m;
}

Json encode(const StatusReport& m) {
  Json j;
  j["task_id"] = m.task_id;
  j["new_state"] = to_string(m.new_state);
  if (m.failure_kind) j["failure_kind"] = to_string(*m.failure_kind);
  if (m.metrics) j["metrics"] = encode_metrics(*m.metrics);
  if (!m.output_files.empty()) j["output_files"] = encode_files(m.output_files);
  return j;
}

StatusReport decode_status_report(const Json& j) {
  StatusReport m;
  m.task_id = get_string(j, "task_id");
  m.new_state = task_state_from_string(get_string(j, "new_state"));
  if (m.new_state != TaskState::kRunning && m.new_state != TaskState::kSucceeded &&
      m.new_state != TaskState::kFailed) {
    bad("new_state must be RUNNING, SUCCEEDED or FAILED");
  }
  if (optional_field(j, "failure_kind")) {
    m.failure_kind = failure_kind_from_string(get_string(j, "failure_kind"));
  }
  if (const Json* metrics = optional_field(j, "metrics")) {
    TaskMetrics t;
    t.wall_time_s = get_number(*metrics, "wall_time_s");
    t.peak_memory_bytes = get_int(*metrics, "peak_memory_bytes");
    t.input_bytes_total = get_int(*metrics, "input_bytes_total");
    m.metrics = t;
  }
  if (const Json* outputs = optional_field(j, "output_files")) m.output_files = decode_files(*outputs);
  return m;
}

Json encode(const StatusAck& m) {
  Json j;
  j["ack"] = true;
  j["retry_scheduled"] = m.retry_scheduled;
  j["permanent_failure"] = m.permanent_failure;
  if (m.memory_allocation_bytes) j["memory_allocation_bytes"] = *m.memory_allocation_bytes;
  if (!m.diagnostic.empty()) j["diagnostic"] = m.diagnostic;
  return j;
}

StatusAck decode_status_ack(const Json& j) {
  StatusAck m;
  m.retry_scheduled = get_bool(j, "retry_scheduled");
  m.permanent_failure = get_bool(j, "permanent_failure");
  if (optional_field(j, "memory_allocation_bytes")) {
    m.memory_allocation_bytes = get_int(j, "memory_allocation_bytes");
  }
  if (optional_field(j, "diagnostic")) m.diagnostic = get_string(j, "diagnostic");
  return m;
}

Json encode(const WorkflowSummary& m) {
  Json counts = Json::object();
  for (const auto& [state, n] : m.task_counts) counts[state] = n;
  return Json{{"workflow_id", m.workflow_id}, {"makespan_s", m.makespan_s}, {"task_counts", counts}};
}

WorkflowSummary decode_workflow_summary(const Json& j) {
  WorkflowSummary m;
  m.workflow_id = get_string(j, "workflow_id");
  m.makespan_s = get_number(j, "makespan_s");
  const Json& counts = field(j, "task_counts");
  if (!counts.is_object()) bad("field 'task_counts' must be an object");
  for (const auto& [state, n] : counts.items()) {
    if (!n.is_number_unsigned()) bad("task count for '" + state + "' must be a non-negative integer");
    m.task_counts[state] = n.get<std::size_t>();
  }
  return m;
}

Json encode(const ErrorBody& m) {
  return Json{{"error", Json{{"code", to_string(m.code)}, {"message", m.message}, {"details", m.details}}}};
}

ErrorBody decode_error(const Json& j) {
  const Json& e = field(j, "error");
  ErrorBody m;
  m.code = error_code_from_string(get_string(e, "code"));
  m.message = get_string(e, "message");
  if (const Json* details = optional_field(e, "details")) m.details = details->get<std::vector<std::string>>();
  return m;
}

Json encode_strategies(const std::vector<std::string>& names) { return Json{{"strategies", names}}; }

std::vector<std::string> decode_strategies(const Json& j) {
  return get_array(j, "strategies").get<std::vector<std::string>>();
}

}  // namespace cws::protocol

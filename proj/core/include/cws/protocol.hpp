#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cws/error.hpp"
#include "cws/scheduler.hpp"
#include "cws/workflow.hpp"

// Wire messages of the scheduler interface. Field names and their order in
// encoded objects are fixed; encode(decode(x)) reproduces x byte for byte
// for canonically encoded input.
namespace cws::protocol {

using Json = nlohmann::ordered_json;

struct RegisterRequest {
  std::string workflow_id;
  std::string strategy;
  std::string engine_name;
  std::vector<Edge> dag_hint;  // abstract edges

  friend bool operator==(const RegisterRequest&, const RegisterRequest&) = default;
};

struct RegisterResponse {
  std::string workflow_id;
  std::string strategy;
};

struct SubmitRequest {
  std::vector<TaskSpec> tasks;
};

struct SubmitResponse {
  std::size_t accepted = 0;
};

struct DagPatch {
  std::vector<Edge> physical_edges;
  std::vector<Edge> abstract_edges;

  friend bool operator==(const DagPatch&, const DagPatch&) = default;
};

struct AssignmentResponse {
  std::string workflow_id;
  std::vector<Assignment> assignments;

  friend bool operator==(const AssignmentResponse&, const AssignmentResponse&) = default;
};

enum class FailureKind { kOom, kError };

struct TaskMetrics {
  double wall_time_s = 0;
  Bytes peak_memory_bytes = 0;
  Bytes input_bytes_total = 0;

  friend bool operator==(const TaskMetrics&, const TaskMetrics&) = default;
};

struct StatusReport {
  std::string task_id;
  TaskState new_state = TaskState::kRunning;
  std::optional<FailureKind> failure_kind;
  std::optional<TaskMetrics> metrics;
  // Files the task left on its node; feeds data-locality tie-breaks.
  std::vector<InputFile> output_files;

  friend bool operator==(const StatusReport&, const StatusReport&) = default;
};

struct StatusAck {
  bool retry_scheduled = false;
  bool permanent_failure = false;
  std::optional<Bytes> memory_allocation_bytes;  // set when a retry is queued
  std::string diagnostic;

  friend bool operator==(const StatusAck&, const StatusAck&) = default;
};

struct WorkflowSummary {
  std::string workflow_id;
  double makespan_s = 0;
  std::map<std::string, std::size_t> task_counts;  // by state name

  friend bool operator==(const WorkflowSummary&, const WorkflowSummary&) = default;
};

struct ErrorBody {
  ErrorCode code = ErrorCode::kInternal;
  std::string message;
  std::vector<std::string> details;
};

std::string_view to_string(FailureKind kind);
FailureKind failure_kind_from_string(std::string_view name);

// Encoders produce canonical field order. Decoders throw
// CwsError(kValidation) on missing or mistyped fields.
Json encode(const TaskSpec& spec);
Json encode(const RegisterRequest& m);
Json encode(const RegisterResponse& m);
Json encode(const SubmitRequest& m);
Json encode(const SubmitResponse& m);
Json encode(const DagPatch& m);
Json encode(const Assignment& m);
Json encode(const AssignmentResponse& m);
Json encode(const StatusReport& m);
Json encode(const StatusAck& m);
Json encode(const WorkflowSummary& m);
Json encode(const ErrorBody& m);
Json encode_strategies(const std::vector<std::string>& names);

TaskSpec decode_task(const Json& j);
RegisterRequest decode_register_request(const Json& j);
RegisterResponse decode_register_response(const Json& j);
SubmitRequest decode_submit_request(const Json& j);
SubmitResponse decode_submit_response(const Json& j);
DagPatch decode_dag_patch(const Json& j);
AssignmentResponse decode_assignment_response(const Json& j);
StatusReport decode_status_report(const Json& j);
StatusAck decode_status_ack(const Json& j);
WorkflowSummary decode_workflow_summary(const Json& j);
ErrorBody decode_error(const Json& j);
std::vector<std::string> decode_strategies(const Json& j);

// Parses text; a syntax error becomes CwsError(kValidation).
Json parse(std::string_view text);

}  // namespace cws::protocol

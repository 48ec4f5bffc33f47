#include "cws/provenance.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <mutex>
#include <sstream>

#include "cws/error.hpp"

namespace cws {
namespace {

constexpr std::array<std::string_view, 9> kEventNames{
    "REGISTERED", "SUBMITTED", "READY",       "ASSIGNED", "STARTED",
    "SUCCEEDED",  "FAILED",    "RESUBMITTED", "DECISION",
};

constexpr std::int64_t kMicros = 1'000'000;

void require(const TraceRecord& r, std::initializer_list<std::string_view> keys) {
  for (auto key : keys) {
    if (!r.payload.contains(std::string(key))) {
      throw CwsError(ErrorCode::kValidation, std::string(to_string(r.event_kind)) +
                                                 " record requires payload field '" + std::string(key) + "'");
    }
  }
}

void validate_payload(const TraceRecord& r) {
  if (!r.payload.is_object()) throw CwsError(ErrorCode::kValidation, "payload must be an object");
  if (r.workflow_id.empty()) throw CwsError(ErrorCode::kValidation, "record without workflow_id");
  if (r.event_kind != EventKind::kRegistered && r.task_id.empty()) {
    throw CwsError(ErrorCode::kValidation, "task event without task_id");
  }
  switch (r.event_kind) {
    case EventKind::kRegistered: require(r, {"strategy"}); break;
    case EventKind::kSubmitted: require(r, {"task"}); break;
    case EventKind::kAssigned:
    case EventKind::kDecision: require(r, {"node_id", "memory_allocation_bytes"}); break;
    case EventKind::kStarted: require(r, {"node_id"}); break;
    case EventKind::kSucceeded: {
      require(r, {"metrics"});
      const auto& m = r.payload.at("metrics");
      if (!m.is_object() || !m.contains("wall_time_s") || !m.contains("peak_memory_bytes") ||
          !m.contains("input_bytes_total")) {
        throw CwsError(ErrorCode::kValidation, "SUCCEEDED record requires complete metrics");
      }
      break;
    }
    case EventKind::kFailed: require(r, {"failure_kind"}); break;
    case EventKind::kResubmitted: require(r, {"memory_allocation_bytes"}); break;
    case EventKind::kReady: break;
  }
}

double as_double(const nlohmann::ordered_json& j) { return j.get<double>(); }

}  // namespace

Timestamp Timestamp::wall_now() {
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  const auto us = std::chrono::duration_cast<std::chrono::microseconds>(now).count();
  return {ClockKind::kWall, Seconds(us, kMicros)};
}

std::string format_time(const Timestamp& t) {
  if (t.clock == ClockKind::kSimulated) return to_string(t.seconds);
  const std::int64_t us = t.seconds.numerator() * (kMicros / t.seconds.denominator());
  std::time_t secs = static_cast<std::time_t>(us / kMicros);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%06lldZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<long long>(us % kMicros));
  return buf;
}

Timestamp parse_time(ClockKind clock, std::string_view text) {
  if (clock == ClockKind::kSimulated) return Timestamp::simulated(parse_seconds(text));
  std::tm tm{};
  long long micros = 0;
  const std::string s(text);
  if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%6lldZ", &tm.tm_year, &tm.tm_mon, &tm.tm_mday,
                  &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &micros) != 7) {
    throw CwsError(ErrorCode::kValidation, "malformed ISO-8601 timestamp '" + s + "'");
  }
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  const std::int64_t secs = timegm(&tm);
  return {ClockKind::kWall, Seconds(secs * kMicros + micros, kMicros)};
}

std::string_view to_string(EventKind kind) { return kEventNames[static_cast<std::size_t>(kind)]; }

EventKind event_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kEventNames.size(); ++i) {
    if (kEventNames[i] == name) return static_cast<EventKind>(i);
  }
  throw CwsError(ErrorCode::kValidation, "unknown event kind '" + std::string(name) + "'");
}

std::string encode_record(const TraceRecord& r) {
  nlohmann::ordered_json j;
  j["record_id"] = r.record_id;
  j["clock"] = r.timestamp.clock == ClockKind::kSimulated ? "simulated" : "wall";
  j["time"] = format_time(r.timestamp);
  j["workflow_id"] = r.workflow_id;
  j["task_id"] = r.task_id;
  j["process_name"] = r.process_name;
  j["event_kind"] = to_string(r.event_kind);
  j["payload"] = r.payload;
  return j.dump();
}

TraceRecord decode_record(std::string_view line) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(line);
    TraceRecord r;
    r.record_id = j.at("record_id").get<std::int64_t>();
    const std::string clock = j.at("clock").get<std::string>();
    if (clock != "simulated" && clock != "wall") {
      throw CwsError(ErrorCode::kValidation, "unknown clock '" + clock + "'");
    }
    r.timestamp = parse_time(clock == "wall" ? ClockKind::kWall : ClockKind::kSimulated,
                             j.at("time").get<std::string>());
    r.workflow_id = j.at("workflow_id").get<std::string>();
    r.task_id = j.at("task_id").get<std::string>();
    r.process_name = j.at("process_name").get<std::string>();
    r.event_kind = event_kind_from_string(j.at("event_kind").get<std::string>());
    r.payload = j.at("payload");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw CwsError(ErrorCode::kValidation, std::string("malformed trace record: ") + e.what());
  }
}

bool TraceFilter::matches(const TraceRecord& r) const {
  if (workflow_id && r.workflow_id != *workflow_id) return false;
  if (process_name && r.process_name != *process_name) return false;
  if (event_kind && r.event_kind != *event_kind) return false;
  if (from && r.timestamp.seconds < from->seconds) return false;
  if (to && r.timestamp.seconds > to->seconds) return false;
  return true;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return (values[mid - 1] + values[mid]) / 2.0;
}

ProvenanceStore::ProvenanceStore(const std::filesystem::path& persist_dir) {
  std::error_code ec;
  std::filesystem::create_directories(persist_dir, ec);
  sink_.emplace(persist_dir / "provenance.ndjson", std::ios::app);
  if (!*sink_) {
    throw CwsError(ErrorCode::kValidation, "cannot open provenance log in " + persist_dir.string());
  }
}

std::int64_t ProvenanceStore::append(TraceRecord record) {
  validate_payload(record);
  std::unique_lock lock(mutex_);
  record.record_id = static_cast<std::int64_t>(records_.size()) + 1;
  if (sink_) {
    *sink_ << encode_record(record) << '\n';
    sink_->flush();
  }
  records_.push_back(std::move(record));
  return records_.back().record_id;
}

std::vector<TraceRecord> ProvenanceStore::query(const TraceFilter& filter) const {
  std::shared_lock lock(mutex_);
  std::vector<TraceRecord> out;
  for (const auto& r : records_) {
    if (filter.matches(r)) out.push_back(r);
  }
  return out;
}

std::size_t ProvenanceStore::size() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

std::size_t ProvenanceStore::export_trace(const std::string& workflow_id, std::ostream& out) const {
  TraceFilter filter;
  filter.workflow_id = workflow_id;
  const auto records = query(filter);
  if (records.empty()) throw CwsError(ErrorCode::kNotFound, "unknown workflow '" + workflow_id + "'");
  for (const auto& r : records) out << encode_record(r) << '\n';
  return records.size();
}

std::size_t ProvenanceStore::export_trace(const std::string& workflow_id,
                                          const std::filesystem::path& path) const {
  std::ostringstream buffer;
  const std::size_t n = export_trace(workflow_id, buffer);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CwsError(ErrorCode::kValidation, "cannot write " + path.string());
  out << buffer.str();
  if (!out.flush()) throw CwsError(ErrorCode::kValidation, "cannot write " + path.string());
  return n;
}

std::optional<ProcessStats> ProvenanceStore::aggregate_stats(const std::string& process_name) const {
  TraceFilter filter;
  filter.process_name = process_name;
  filter.event_kind = EventKind::kSucceeded;
  const auto records = query(filter);
  if (records.empty()) return std::nullopt;
  std::vector<double> wall, peak, input;
  for (const auto& r : records) {
    const auto& m = r.payload.at("metrics");
    wall.push_back(as_double(m.at("wall_time_s")));
    peak.push_back(as_double(m.at("peak_memory_bytes")));
    input.push_back(as_double(m.at("input_bytes_total")));
  }
  return ProcessStats{records.size(), median(wall), median(peak), median(input)};
}

std::vector<TraceRecord> import_trace(std::istream& in) {
  std::vector<TraceRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(decode_record(line));
  }
  return out;
}

std::vector<TraceRecord> import_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CwsError(ErrorCode::kNotFound, "cannot read " + path.string());
  return import_trace(in);
}

}  // namespace cws

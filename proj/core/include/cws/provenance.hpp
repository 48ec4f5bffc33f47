#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "cws/units.hpp"

namespace cws {

enum class ClockKind { kSimulated, kWall };

// A point in time. Simulated time is exact rational seconds since the start
// of the run; wall time is microseconds since the Unix epoch, rendered as
// ISO-8601 UTC.
struct Timestamp {
  ClockKind clock = ClockKind::kSimulated;
  Seconds seconds{0};

  static Timestamp simulated(Seconds s) { return {ClockKind::kSimulated, s}; }
  static Timestamp wall_now();

  friend bool operator==(const Timestamp&, const Timestamp&) = default;
};

std::string format_time(const Timestamp& t);
Timestamp parse_time(ClockKind clock, std::string_view text);

using Clock = std::function<Timestamp()>;

enum class EventKind {
  kRegistered,
  kSubmitted,
  kReady,
  kAssigned,
  kStarted,
  kSucceeded,
  kFailed,
  kResubmitted,
  kDecision,
};

std::string_view to_string(EventKind kind);
EventKind event_kind_from_string(std::string_view name);

struct TraceRecord {
  std::int64_t record_id = 0;  // assigned by the store
  Timestamp timestamp;
  std::string workflow_id;
  std::string task_id;
  std::string process_name;
  EventKind event_kind = EventKind::kRegistered;
  nlohmann::ordered_json payload = nlohmann::ordered_json::object();

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

// One NDJSON line; record_id is always the first field.
std::string encode_record(const TraceRecord& record);
TraceRecord decode_record(std::string_view line);

struct TraceFilter {
  std::optional<std::string> workflow_id;
  std::optional<std::string> process_name;
  std::optional<EventKind> event_kind;
  std::optional<Timestamp> from;  // inclusive
  std::optional<Timestamp> to;    // inclusive

  bool matches(const TraceRecord& record) const;
};

struct ProcessStats {
  std::size_t count = 0;
  double median_wall_time_s = 0;
  double median_peak_memory_bytes = 0;
  double median_input_bytes = 0;
};

// Median with the mean-of-middle-two convention for even sizes.
double median(std::vector<double> values);

// Append-only trace of everything the scheduler observes. Records are
// immutable once appended; readers get a prefix-consistent snapshot.
class ProvenanceStore {
 public:
  ProvenanceStore() = default;
  // Every accepted record is also appended to `<dir>/provenance.ndjson`.
  explicit ProvenanceStore(const std::filesystem::path& persist_dir);

  // Validates the payload for the event kind; throws CwsError(kValidation).
  std::int64_t append(TraceRecord record);

  std::vector<TraceRecord> query(const TraceFilter& filter = {}) const;
  std::size_t size() const;

  // Writes the workflow's records as NDJSON in record_id order.
  // Throws kNotFound for an unknown workflow and kValidation when the
  // destination cannot be written.
  std::size_t export_trace(const std::string& workflow_id, const std::filesystem::path& out) const;
  std::size_t export_trace(const std::string& workflow_id, std::ostream& out) const;

  // nullopt when the process has no successful executions.
  std::optional<ProcessStats> aggregate_stats(const std::string& process_name) const;

 private:
  mutable std::shared_mutex mutex_;
  std::vector<TraceRecord> records_;
  std::optional<std::ofstream> sink_;
};

std::vector<TraceRecord> import_trace(std::istream& in);
std::vector<TraceRecord> import_trace(const std::filesystem::path& path);

}  // namespace cws

#include "cws/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "cws/error.hpp"

namespace cws {
namespace {

std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(std::string_view field, std::size_t line) {
  double v = 0;
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || end != field.data() + field.size()) {
    throw CwsError(ErrorCode::kValidation, "csv line " + std::to_string(line) + ": bad number '" +
                                               std::string(field) + "'");
  }
  return v;
}

std::uint64_t parse_unsigned(std::string_view field, std::size_t line) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || end != field.data() + field.size()) {
    throw CwsError(ErrorCode::kValidation, "csv line " + std::to_string(line) + ": bad integer '" +
                                               std::string(field) + "'");
  }
  return v;
}

std::string write_decision_log(const std::filesystem::path& dir, const std::string& workload,
                               const std::string& strategy, std::uint64_t seed, const ProvenanceStore& store) {
  std::filesystem::create_directories(dir);
  const auto path = dir / (workload + "__" + strategy + "__" + std::to_string(seed) + ".ndjson");
  std::ofstream out(path);
  if (!out) throw CwsError(ErrorCode::kValidation, "cannot write " + path.string());
  TraceFilter filter;
  filter.event_kind = EventKind::kDecision;
  for (const auto& r : store.query(filter)) out << encode_record(r) << "\n";
  return path.string();
}

}  // namespace

ExperimentRow row_from_result(const WorkloadDef& workload, const std::string& strategy, std::uint64_t seed,
                              const SimResult& result) {
  ExperimentRow row;
  row.workload = workload.name;
  row.strategy = strategy;
  row.seed = seed;
  row.makespan_s = to_double(result.makespan);
  row.failed = result.failed + result.unfinished;
  auto it = result.wastage.find("");
  row.wastage = it == result.wastage.end() ? 0.0 : it->second.wastage;
  row.total_tasks = workload.tasks.size();
  return row;
}

std::vector<ExperimentRow> run_experiment(const std::vector<WorkloadDef>& workloads,
                                          const std::vector<std::string>& strategies, const ClusterDef& cluster,
                                          const ExperimentOptions& options) {
  std::vector<ExperimentRow> rows;
  for (const auto& workload : workloads) {
    for (const auto& strategy : strategies) {
      for (int r = 0; r < std::max(1, options.repetitions); ++r) {
        const std::uint64_t seed = cluster.seed + static_cast<std::uint64_t>(r);
        SimOptions sim = options.sim;
        sim.seed = seed;
        try {
          const auto run = run_simulation(cluster, workload, strategy, sim, options.config);
          auto row = row_from_result(workload, strategy, seed, run.result);
          if (options.decision_log_dir) {
            row.decision_log_path =
                write_decision_log(*options.decision_log_dir, workload.name, strategy, seed, *run.provenance);
          }
          rows.push_back(std::move(row));
        } catch (const std::exception&) {
          ExperimentRow row;
          row.workload = workload.name;
          row.strategy = strategy;
          row.seed = seed;
          row.failed = workload.tasks.size();
          row.total_tasks = workload.tasks.size();
          rows.push_back(std::move(row));
        }
      }
    }
  }
  return rows;
}

std::string to_csv(const std::vector<ExperimentRow>& rows) {
  std::string out = "workload,strategy,seed,makespan_s,failed,wastage\n";
  for (const auto& r : rows) {
    out += r.workload + "," + r.strategy + "," + std::to_string(r.seed) + "," + format_double(r.makespan_s) + "," +
           std::to_string(r.failed) + "," + format_double(r.wastage) + "\n";
  }
  return out;
}

std::vector<ExperimentRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<ExperimentRow> rows;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (number == 1) {
      if (line != "workload,strategy,seed,makespan_s,failed,wastage") {
        throw CwsError(ErrorCode::kValidation, "unexpected csv header '" + line + "'");
      }
      continue;
    }
    std::vector<std::string> fields;
    std::string field;
    std::istringstream cells(line);
    while (std::getline(cells, field, ',')) fields.push_back(field);
    if (fields.size() != 6) {
      throw CwsError(ErrorCode::kValidation, "csv line " + std::to_string(number) + ": expected 6 fields");
    }
    ExperimentRow r;
    r.workload = fields[0];
    r.strategy = fields[1];
    r.seed = parse_unsigned(fields[2], number);
    r.makespan_s = parse_double(fields[3], number);
    r.failed = parse_unsigned(fields[4], number);
    r.wastage = parse_double(fields[5], number);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string baseline_report(const std::vector<ExperimentRow>& rows) {
  std::vector<std::string> workloads;
  std::map<std::string, std::vector<std::string>> strategies;
  std::map<std::pair<std::string, std::string>, std::vector<double>> makespans;
  for (const auto& r : rows) {
    if (std::find(workloads.begin(), workloads.end(), r.workload) == workloads.end()) workloads.push_back(r.workload);
    auto& list = strategies[r.workload];
    if (std::find(list.begin(), list.end(), r.strategy) == list.end()) list.push_back(r.strategy);
    makespans[{r.workload, r.strategy}].push_back(r.makespan_s);
  }

  std::ostringstream out;
  for (const auto& w : workloads) {
    out << w << "\n";
    const auto baseline_it = makespans.find({w, "fifo"});
    // Zero means no usable fifo baseline for this workload.
    const double baseline = baseline_it == makespans.end() ? 0.0 : median(baseline_it->second);
    for (const auto& s : strategies[w]) {
      const double m = median(makespans[{w, s}]);
      char line[160];
      if (s == "fifo") {
        std::snprintf(line, sizeof line, "  %-12s %12.3f  baseline (fifo with round-robin placement)\n", s.c_str(), m);
      } else if (baseline > 0) {
        std::snprintf(line, sizeof line, "  %-12s %12.3f  %+.2f%%\n", s.c_str(), m, (m - baseline) / baseline * 100.0);
      } else {
        std::snprintf(line, sizeof line, "  %-12s %12.3f\n", s.c_str(), m);
      }
      out << line;
    }
  }
  return out.str();
}

SimResult drive_live_server(CwsiClient& client, const ClusterDef& cluster, const WorkloadDef& workload,
                            const std::string& strategy, const SimOptions& options) {
  Simulator simulator(cluster, workload, client, strategy, options);
  return simulator.run();
}

std::vector<WorkloadDef> load_workload_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw CwsError(ErrorCode::kValidation, dir.string() + " is not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<WorkloadDef> workloads;
  for (const auto& f : files) workloads.push_back(load_workload(f));
  return workloads;
}

}  // namespace cws

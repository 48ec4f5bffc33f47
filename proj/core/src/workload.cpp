#include "cws/workload.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "cws/error.hpp"
#include "cws/protocol.hpp"

namespace cws {
namespace {

using Json = nlohmann::ordered_json;

std::string line_context(std::string_view text, std::size_t byte) {
  std::size_t line = 1, column = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  // 53 random bits; identical on every platform, unlike the std distributions.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double log_uniform(double lo, double hi) { return lo * std::pow(hi / lo, uniform()); }

 private:
  std::mt19937_64 engine_;
};

std::vector<std::vector<int>> shape_dependencies(WorkloadShape shape, int n) {
  std::vector<std::vector<int>> deps(n);
  if (n <= 1) return deps;
  switch (shape) {
    case WorkloadShape::kChain:
      for (int i = 1; i < n; ++i) deps[i] = {i - 1};
      break;
    case WorkloadShape::kForkJoin:
      for (int i = 1; i < n - 1; ++i) deps[i] = {0};
      if (n == 2) {
        deps[1] = {0};
      } else {
        for (int i = 1; i < n - 1; ++i) deps[n - 1].push_back(i);
      }
      break;
    case WorkloadShape::kDiamondMesh: {
      if (n == 2) {
        deps[1] = {0};
        break;
      }
      const int middle = n - 2;
      const int width = std::max(1, static_cast<int>(std::lround(std::sqrt(middle))));
      std::vector<int> previous{0};
      std::vector<char> has_successor(n, 0);
      for (int start = 1; start <= middle; start += width) {
        std::vector<int> layer;
        for (int t = start; t < std::min(start + width, middle + 1); ++t) layer.push_back(t);
        for (std::size_t j = 0; j < layer.size(); ++j) {
          std::set<int> parents{previous[j % previous.size()], previous[(j + 1) % previous.size()]};
          for (int p : parents) {
            deps[layer[j]].push_back(p);
            has_successor[p] = 1;
          }
        }
        previous = layer;
      }
      for (int t = 0; t < n - 1; ++t) {
        if (!has_successor[t]) deps[n - 1].push_back(t);
      }
      break;
    }
  }
  return deps;
}

std::string process_for(WorkloadShape shape, int index, int n) {
  static const char* kWork[] = {"align", "sort", "call"};
  switch (shape) {
    case WorkloadShape::kChain:
      return "step";
    case WorkloadShape::kForkJoin:
      if (index == 0) return "split";
      if (index == n - 1 && n > 1) return "merge";
      return kWork[index % 3];
    case WorkloadShape::kDiamondMesh:
      if (index == 0) return "fetch";
      if (index == n - 1 && n > 1) return "report";
      return std::string("stage_") + kWork[index % 3];
  }
  return "task";
}

}  // namespace

std::string_view to_string(RevealMode mode) { return mode == RevealMode::kFullDag ? "FULL_DAG" : "INCREMENTAL"; }

RevealMode reveal_mode_from_string(std::string_view name) {
  if (name == "FULL_DAG") return RevealMode::kFullDag;
  if (name == "INCREMENTAL") return RevealMode::kIncremental;
  throw CwsError(ErrorCode::kValidation, "unknown reveal_mode '" + std::string(name) + "'");
}

const WorkloadTask& WorkloadDef::task(const std::string& task_id) const {
  for (const auto& t : tasks) {
    if (t.spec.task_id == task_id) return t;
  }
  throw CwsError(ErrorCode::kNotFound, "workload has no task '" + task_id + "'");
}

std::vector<TaskSpec> WorkloadDef::specs() const {
  std::vector<TaskSpec> out;
  out.reserve(tasks.size());
  for (const auto& t : tasks) out.push_back(t.spec);
  return out;
}

void validate(const WorkloadDef& workload) {
  if (workload.name.empty()) throw CwsError(ErrorCode::kValidation, "workload needs a workflow name");
  for (const auto& t : workload.tasks) {
    if (t.truth.true_runtime_s <= 0) {
      throw CwsError(ErrorCode::kValidation, "task '" + t.spec.task_id + "': true_runtime_s must be positive");
    }
    if (t.truth.true_peak_memory_bytes < 0) {
      throw CwsError(ErrorCode::kValidation,
                     "task '" + t.spec.task_id + "': true_peak_memory_bytes must be non-negative");
    }
  }
  // The DAG performs id, request, dependency and cycle checks in one pass.
  WorkflowDag dag(workload.name);
  try {
    dag.add_tasks(workload.specs());
  } catch (const CwsError& e) {
    std::string message = e.what();
    for (const auto& d : e.details()) message += "; " + d;
    throw CwsError(e.code(), message, e.details());
  }
}

WorkloadDef parse_workload(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw CwsError(ErrorCode::kValidation,
                   "workload parse error at " + line_context(text, e.byte == 0 ? 0 : e.byte - 1) + ": " + e.what());
  }
  WorkloadDef w;
  try {
    w.name = j.at("workflow").get<std::string>();
    w.reveal_mode = reveal_mode_from_string(j.value("reveal_mode", std::string("FULL_DAG")));
    std::size_t index = 0;
    for (const auto& tj : j.at("tasks")) {
      WorkloadTask t;
      try {
        Json stripped = tj;
        const Json truth = stripped.at("sim_truth");
        stripped.erase("sim_truth");
        t.spec = protocol::decode_task(stripped);
        t.truth.true_runtime_s = seconds_from_double(truth.at("true_runtime_s").get<double>());
        t.truth.true_peak_memory_bytes = truth.at("true_peak_memory_bytes").get<Bytes>();
        if (truth.contains("output_files")) {
          for (const auto& f : truth.at("output_files")) {
            t.truth.output_files.push_back({f.at("path").get<std::string>(), f.at("size_bytes").get<Bytes>()});
          }
        }
      } catch (const std::exception& e) {
        throw CwsError(ErrorCode::kValidation, "tasks[" + std::to_string(index) + "]: " + e.what());
      }
      w.tasks.push_back(std::move(t));
      ++index;
    }
  } catch (const nlohmann::json::exception& e) {
    throw CwsError(ErrorCode::kValidation, std::string("malformed workload: ") + e.what());
  }
  validate(w);
  return w;
}

WorkloadDef load_workload(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CwsError(ErrorCode::kValidation, "cannot read workload " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_workload(buffer.str());
  } catch (const CwsError& e) {
    throw CwsError(e.code(), path.string() + ": " + e.what(), e.details());
  }
}

std::string dump_workload(const WorkloadDef& workload) {
  Json j;
  j["workflow"] = workload.name;
  j["reveal_mode"] = to_string(workload.reveal_mode);
  j["tasks"] = Json::array();
  for (const auto& t : workload.tasks) {
    Json tj = protocol::encode(t.spec);
    Json outputs = Json::array();
    for (const auto& f : t.truth.output_files) outputs.push_back({{"path", f.path}, {"size_bytes", f.size_bytes}});
    tj["sim_truth"] = Json{{"true_runtime_s", to_double(t.truth.true_runtime_s)},
                           {"true_peak_memory_bytes", t.truth.true_peak_memory_bytes},
                           {"output_files", outputs}};
    j["tasks"].push_back(std::move(tj));
  }
  return j.dump(2) + "\n";
}

std::string_view to_string(WorkloadShape shape) {
  switch (shape) {
    case WorkloadShape::kChain: return "chain";
    case WorkloadShape::kForkJoin: return "fork_join";
    case WorkloadShape::kDiamondMesh: return "diamond_mesh";
  }
  return "chain";
}

WorkloadShape workload_shape_from_string(std::string_view name) {
  if (name == "chain") return WorkloadShape::kChain;
  if (name == "fork_join") return WorkloadShape::kForkJoin;
  if (name == "diamond_mesh") return WorkloadShape::kDiamondMesh;
  throw CwsError(ErrorCode::kValidation,
                 "unknown shape '" + std::string(name) + "' (expected chain, fork_join or diamond_mesh)");
}

WorkloadDef generate_workload(WorkloadShape shape, int n_tasks, std::uint64_t seed) {
  if (n_tasks < 1) throw CwsError(ErrorCode::kValidation, "n_tasks must be at least 1");
  constexpr double kInputRate = 16.0 * kMiB;  // bytes of input per reference second

  Rng rng(seed);
  const auto deps = shape_dependencies(shape, n_tasks);
  WorkloadDef w;
  w.name = std::string(to_string(shape)) + "-n" + std::to_string(n_tasks) + "-s" + std::to_string(seed);
  w.reveal_mode = RevealMode::kFullDag;

  auto id = [](int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "t%03d", i);
    return std::string(buf);
  };

  // Memory is a property of the process: every task of one process requests
  // the same amount, while its actual peak varies per task.
  std::map<std::string, Bytes> process_memory;
  for (int i = 0; i < n_tasks; ++i) {
    WorkloadTask t;
    const double runtime = std::round(rng.log_uniform(10.0, 600.0) * 1000.0) / 1000.0;
    const std::string process = process_for(shape, i, n_tasks);
    auto [memory_it, fresh] = process_memory.try_emplace(process, 0);
    if (fresh) memory_it->second = static_cast<Bytes>(std::llround(rng.log_uniform(256.0, 8192.0))) * kMiB;
    const Bytes memory = memory_it->second;
    const double peak_fraction = rng.uniform(0.5, 0.95);
    const double noise = rng.uniform(0.8, 1.25);
    const bool two_cores = rng.uniform() < 0.3;
    const Bytes output = static_cast<Bytes>(std::llround(rng.uniform(16.0, 256.0))) * kMiB;

    t.spec.task_id = id(i);
    t.spec.process_name = process;
    t.spec.cpu_request = MilliCores{two_cores ? 2000 : 1000};
    t.spec.memory_request_bytes = memory;
    t.spec.parameters["index"] = std::to_string(i);

    Bytes from_predecessors = 0;
    for (int p : deps[i]) {
      t.spec.depends_on.push_back(id(p));
      const auto& out = w.tasks[p].truth.output_files.front();
      t.spec.input_files.push_back(out);
      from_predecessors += out.size_bytes;
    }
    const Bytes target = static_cast<Bytes>(std::llround(runtime * kInputRate * noise));
    t.spec.input_files.insert(t.spec.input_files.begin(),
                              InputFile{"input/" + id(i) + ".dat", std::max<Bytes>(kMiB, target - from_predecessors)});

    t.truth.true_runtime_s = Seconds(static_cast<std::int64_t>(std::llround(runtime * 1000.0)), 1000);
    t.truth.true_peak_memory_bytes =
        static_cast<Bytes>(std::llround(static_cast<double>(memory / kMiB) * peak_fraction)) * kMiB;
    t.truth.output_files.push_back({"work/" + id(i) + ".out", output});
    w.tasks.push_back(std::move(t));
  }
  validate(w);
  return w;
}

}  // namespace cws

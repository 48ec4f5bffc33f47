#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cws/client.hpp"
#include "cws/cluster.hpp"
#include "cws/config.hpp"
#include "cws/error.hpp"
#include "cws/experiment.hpp"
#include "cws/server.hpp"
#include "cws/service.hpp"
#include "cws/simulator.hpp"
#include "cws/workload.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitTransport = 3;
constexpr int kExitInternal = 4;

int exit_code_for(cws::ErrorCode code) {
  switch (code) {
    case cws::ErrorCode::kTransport: return kExitTransport;
    case cws::ErrorCode::kInternal: return kExitInternal;
    default: return kExitValidation;
  }
}

std::string env_or(const char* name, std::string fallback) {
  const char* value = std::getenv(name);
  return value && *value ? std::string(value) : std::move(fallback);
}

cws::ServiceConfig config_from(const std::string& path) {
  return path.empty() ? cws::ServiceConfig{} : cws::load_config(path);
}

std::vector<std::string> split_list(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw cws::CwsError(cws::ErrorCode::kValidation, "cannot write " + path);
  out << content;
}

struct ServeArgs {
  std::string cluster;
  int port = 0;
  std::string host = "127.0.0.1";
  std::string token;
  std::string config;
  std::string provenance_dir;
  std::int64_t poll_timeout_ms = -1;
  int threads = 16;
};

int serve(const ServeArgs& args) {
  auto config = config_from(args.config);
  if (args.poll_timeout_ms >= 0) config.poll_timeout_ms = args.poll_timeout_ms;
  auto store = args.provenance_dir.empty() ? std::make_shared<cws::ProvenanceStore>()
                                           : std::make_shared<cws::ProvenanceStore>(args.provenance_dir);
  cws::CwsService service(cws::load_cluster(args.cluster), config, {}, store);

  // Block termination signals before any thread starts so only sigwait sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  cws::ServerOptions options;
  options.host = args.host;
  options.port = args.port;
  options.token = args.token;
  options.worker_threads = args.threads;
  cws::CwsServer server(service, options);
  const int port = server.start();
  std::cout << "cws listening on " << args.host << ":" << port << std::endl;

  int received = 0;
  sigwait(&signals, &received);
  std::cout << "shutting down" << std::endl;
  server.stop();
  return kExitOk;
}

struct RunArgs {
  std::string workload;
  std::string cluster;
  std::string strategy = "rank_min_rr";
  std::string server;
  std::string token;
  std::string config;
  std::string workflow_id;
  std::string events_out;
  std::optional<std::uint64_t> seed;
  double jitter = 0;
};

int run(const RunArgs& args) {
  const auto workload = cws::load_workload(args.workload);
  auto cluster = cws::load_cluster(args.cluster);
  cws::SimOptions sim;
  sim.seed = args.seed;
  sim.runtime_jitter = args.jitter;
  sim.workflow_id = args.workflow_id;

  cws::SimResult result;
  if (args.server.empty()) {
    result = cws::run_simulation(cluster, workload, args.strategy, sim, config_from(args.config)).result;
  } else {
    cws::HttpClientOptions options;
    options.token = args.token;
    cws::HttpClient client(args.server, options);
    result = cws::drive_live_server(client, cluster, workload, args.strategy, sim);
  }
  if (!args.events_out.empty()) write_file(args.events_out, result.event_log());

  const auto row = cws::row_from_result(workload, args.strategy, sim.seed.value_or(cluster.seed), result);
  std::cout << cws::to_csv({row});
  const auto violations = cws::replay_ledger(cluster, result.ledger);
  if (result.capacity_violations > 0 || !violations.empty()) {
    for (const auto& v : violations) std::cerr << "capacity violation: " << v << "\n";
    return kExitInternal;
  }
  return kExitOk;
}

struct SweepArgs {
  std::string workloads;
  std::string strategies;
  std::string cluster;
  std::string out = "results.csv";
  std::string config;
  std::string decision_logs;
  int repetitions = 1;
  double jitter = 0;
};

int sweep(const SweepArgs& args) {
  const auto workloads = cws::load_workload_dir(args.workloads);
  const auto cluster = cws::load_cluster(args.cluster);
  auto strategies = split_list(args.strategies);
  if (strategies.empty()) strategies = cws::strategy_names();
  for (const auto& s : strategies) {
    if (!cws::strategy_from_string(s)) {
      throw cws::CwsError(cws::ErrorCode::kUnknownStrategy, "unknown strategy '" + s + "'", cws::strategy_names());
    }
  }

  cws::ExperimentOptions options;
  options.repetitions = args.repetitions;
  options.config = config_from(args.config);
  options.sim.runtime_jitter = args.jitter;
  if (!args.decision_logs.empty()) options.decision_log_dir = args.decision_logs;

  const auto rows = cws::run_experiment(workloads, strategies, cluster, options);
  write_file(args.out, cws::to_csv(rows));
  std::cout << cws::baseline_report(rows);
  std::cout << "wrote " << rows.size() << " rows to " << args.out << std::endl;
  return kExitOk;
}

struct GenArgs {
  std::string shape;
  int n = 10;
  std::uint64_t seed = 0;
  std::string out;
  bool incremental = false;
};

int gen(const GenArgs& args) {
  auto workload = cws::generate_workload(cws::workload_shape_from_string(args.shape), args.n, args.seed);
  if (args.incremental) workload.reveal_mode = cws::RevealMode::kIncremental;
  const auto text = cws::dump_workload(workload);
  if (args.out.empty()) {
    std::cout << text;
  } else {
    write_file(args.out, text);
  }
  return kExitOk;
}

struct ExportArgs {
  std::string workflow;
  std::string out;
  std::string provenance_dir;
  std::string server;
  std::string token;
};

int export_trace(const ExportArgs& args) {
  if (args.provenance_dir.empty() == args.server.empty()) {
    throw cws::CwsError(cws::ErrorCode::kValidation, "pass exactly one of --provenance-dir or --server");
  }
  if (!args.server.empty()) {
    cws::HttpClientOptions options;
    options.token = args.token;
    cws::HttpClient client(args.server, options);
    write_file(args.out, client.fetch_provenance(args.workflow));
    return kExitOk;
  }
  cws::ProvenanceStore store;
  for (auto& record : cws::import_trace(std::filesystem::path(args.provenance_dir) / "provenance.ndjson")) {
    store.append(std::move(record));
  }
  const auto n = store.export_trace(args.workflow, std::filesystem::path(args.out));
  std::cout << "exported " << n << " records to " << args.out << std::endl;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cws: workflow-aware scheduler service, simulator and experiment harness"};
  app.require_subcommand(1);

  ServeArgs serve_args;
  serve_args.port = std::atoi(env_or("CWS_PORT", "8080").c_str());
  serve_args.token = env_or("CWS_TOKEN", "");
  auto* serve_cmd = app.add_subcommand("serve", "Run the scheduler as an HTTP service");
  serve_cmd->add_option("--cluster", serve_args.cluster, "Cluster definition (JSON)")->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--port", serve_args.port, "Listen port, 0 for any (default $CWS_PORT or 8080)");
  serve_cmd->add_option("--host", serve_args.host, "Listen address");
  serve_cmd->add_option("--token", serve_args.token, "Require this bearer token (default $CWS_TOKEN)");
  serve_cmd->add_option("--config", serve_args.config, "INI configuration file")->check(CLI::ExistingFile);
  serve_cmd->add_option("--provenance-dir", serve_args.provenance_dir, "Persist provenance to <dir>/provenance.ndjson");
  serve_cmd->add_option("--poll-timeout-ms", serve_args.poll_timeout_ms, "Long-poll timeout for assignment fetches");
  serve_cmd->add_option("--threads", serve_args.threads, "HTTP worker threads")->check(CLI::PositiveNumber);

  RunArgs run_args;
  run_args.token = env_or("CWS_TOKEN", "");
  auto* run_cmd = app.add_subcommand("run", "Simulate one workload under one strategy");
  run_cmd->add_option("--workload", run_args.workload, "Workload file (JSON)")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--cluster", run_args.cluster, "Cluster definition (JSON)")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--strategy", run_args.strategy, "Scheduling strategy");
  run_cmd->add_option("--server", run_args.server, "Drive a running `cws serve` at this URL instead of in process");
  run_cmd->add_option("--token", run_args.token, "Bearer token for --server (default $CWS_TOKEN)");
  run_cmd->add_option("--config", run_args.config, "INI configuration for the in-process service")
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--workflow-id", run_args.workflow_id, "Workflow id (default: workload name)");
  run_cmd->add_option("--seed", run_args.seed, "Override the cluster seed");
  run_cmd->add_option("--jitter", run_args.jitter, "Runtime jitter fraction")->check(CLI::Range(0.0, 0.99));
  run_cmd->add_option("--events", run_args.events_out, "Write the simulator event log here");

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run every workload in a directory under several strategies");
  sweep_cmd->add_option("--workloads", sweep_args.workloads, "Directory of workload files")
      ->required()
      ->check(CLI::ExistingDirectory);
  sweep_cmd->add_option("--strategies", sweep_args.strategies, "Comma separated strategy names (default: all)");
  sweep_cmd->add_option("--cluster", sweep_args.cluster, "Cluster definition (JSON)")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--out", sweep_args.out, "CSV output path");
  sweep_cmd->add_option("--repetitions", sweep_args.repetitions, "Seeds per cell")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--config", sweep_args.config, "INI configuration file")->check(CLI::ExistingFile);
  sweep_cmd->add_option("--decision-logs", sweep_args.decision_logs, "Write per-run decision logs here");
  sweep_cmd->add_option("--jitter", sweep_args.jitter, "Runtime jitter fraction")->check(CLI::Range(0.0, 0.99));

  GenArgs gen_args;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic workload");
  gen_cmd->add_option("--shape", gen_args.shape, "chain, fork_join or diamond_mesh")
      ->required()
      ->check(CLI::IsMember({"chain", "fork_join", "diamond_mesh"}));
  gen_cmd->add_option("--n", gen_args.n, "Number of tasks")->required()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen_args.seed, "Generator seed");
  gen_cmd->add_option("--out", gen_args.out, "Output path (default: stdout)");
  gen_cmd->add_flag("--incremental", gen_args.incremental, "Mark the workload for incremental submission");

  ExportArgs export_args;
  export_args.token = env_or("CWS_TOKEN", "");
  auto* export_cmd = app.add_subcommand("export", "Export one workflow's provenance as NDJSON");
  export_cmd->add_option("--workflow", export_args.workflow, "Workflow id")->required();
  export_cmd->add_option("--out", export_args.out, "Output path")->required();
  export_cmd->add_option("--provenance-dir", export_args.provenance_dir, "Directory written by serve --provenance-dir");
  export_cmd->add_option("--server", export_args.server, "Fetch from a running server instead");
  export_cmd->add_option("--token", export_args.token, "Bearer token for --server (default $CWS_TOKEN)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*serve_cmd) return serve(serve_args);
    if (*run_cmd) return run(run_args);
    if (*sweep_cmd) return sweep(sweep_args);
    if (*gen_cmd) return gen(gen_args);
    if (*export_cmd) return export_trace(export_args);
  } catch (const cws::CwsError& e) {
    std::cerr << "error (" << cws::to_string(e.code()) << "): " << e.what() << "\n";
    for (const auto& d : e.details()) std::cerr << "  " << d << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "cws/error.hpp"
#include "cws/experiment.hpp"
#include "cws/server.hpp"
#include "cws/service.hpp"
#include "support/oracles.hpp"
#include "support/reference_scheduler.hpp"

namespace cws {
namespace {

using testing::data_path;
using testing::sim_task;

const std::vector<std::string> kCoveredStrategies{"fifo", "rr", "rank_min_rr", "rank_max_rr"};

ClusterDef hetero4() { return load_cluster(data_path("clusters/hetero4.json")); }

std::vector<WorkloadDef> bundled() { return load_workload_dir(data_path("workloads")); }

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const CwsError& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

TEST(Workloads, BundledSetLoads) {
  const auto all = bundled();
  ASSERT_EQ(all.size(), 3u);
  EXPECT_EQ(all[0].name, "W1");
  const auto& w1 = all[0];
  ASSERT_EQ(w1.tasks.size(), 5u);
  EXPECT_EQ(w1.task("B").spec.depends_on, std::vector<std::string>{"A"});
  EXPECT_EQ(w1.task("C").spec.depends_on, std::vector<std::string>{"B"});
  EXPECT_TRUE(w1.task("X").spec.depends_on.empty());
  EXPECT_TRUE(w1.task("Y").spec.depends_on.empty());
}

TEST(Workloads, W1MakespansOnTwoSlots) {
  const auto w1 = bundled()[0];
  EXPECT_EQ(run_simulation(testing::two_slot_cluster(), w1, "fifo").result.makespan, Seconds(40));
  EXPECT_EQ(run_simulation(testing::two_slot_cluster(), w1, "rank_min_rr").result.makespan, Seconds(30));
}

TEST(Workloads, SingleNodeSerializesEverything) {
  const auto w1 = bundled()[0];
  const auto single = load_cluster(data_path("clusters/single_node.json"));
  for (const auto& s : strategy_names()) {
    EXPECT_EQ(run_simulation(single, w1, s).result.makespan, Seconds(50)) << s;
  }
}

// The reference model must agree with the library on every bundled and
// generated workload for each strategy it covers.
TEST(ReferenceModel, AgreesWithSimulatorOnBundledWorkloads) {
  for (const auto& cluster : {hetero4(), testing::two_slot_cluster()}) {
    for (const auto& w : bundled()) {
      for (const auto& s : kCoveredStrategies) {
        const auto expected = testing::reference_makespan(cluster, w, s);
        const auto run = run_simulation(cluster, w, s).result;
        EXPECT_EQ(run.makespan, expected.makespan) << w.name << " " << s;
        EXPECT_EQ(run.failed, static_cast<std::size_t>(expected.permanent_failures)) << w.name << " " << s;
      }
    }
  }
}

TEST(ReferenceModel, AgreesWithSimulatorOnGeneratedWorkloads) {
  const auto cluster = hetero4();
  for (auto shape : {WorkloadShape::kChain, WorkloadShape::kForkJoin, WorkloadShape::kDiamondMesh}) {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
      const auto w = generate_workload(shape, 12 + static_cast<int>(seed) * 5, seed);
      for (const auto& s : kCoveredStrategies) {
        const auto expected = testing::reference_makespan(cluster, w, s);
        const auto run = run_simulation(cluster, w, s).result;
        EXPECT_EQ(run.makespan, expected.makespan) << to_string(shape) << " seed " << seed << " " << s;
      }
    }
  }
}

TEST(ReferenceModel, RankNeverWorseThanFifoOnBundledSet) {
  for (const auto& w : bundled()) {
    const auto fifo = testing::reference_makespan(hetero4(), w, "fifo").makespan;
    const auto rank = testing::reference_makespan(hetero4(), w, "rank_min_rr").makespan;
    EXPECT_LE(rank, fifo) << w.name;
  }
}

TEST(Experiment, RepeatedSweepIsIdentical) {
  const auto rows = run_experiment(bundled(), strategy_names(), hetero4());
  EXPECT_EQ(rows.size(), 3 * strategy_names().size());
  EXPECT_EQ(run_experiment(bundled(), strategy_names(), hetero4()), rows);
  for (const auto& r : rows) EXPECT_EQ(r.failed, 0u) << r.workload << " " << r.strategy;
}

TEST(Experiment, RepetitionsAdvanceSeed) {
  ExperimentOptions options;
  options.repetitions = 3;
  const auto rows = run_experiment({bundled()[0]}, {"fifo"}, hetero4(), options);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].seed, 42u);
  EXPECT_EQ(rows[2].seed, 44u);
}

TEST(Experiment, UnknownStrategyBecomesFailedRow) {
  const auto rows = run_experiment({bundled()[0]}, {"no-such"}, hetero4());
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].failed, 5u);
  EXPECT_EQ(rows[0].makespan_s, 0.0);
}

TEST(Experiment, DecisionLogsAreNamedPerCell) {
  const auto dir = std::filesystem::temp_directory_path() / "cws-decision-logs";
  std::filesystem::remove_all(dir);
  ExperimentOptions options;
  options.decision_log_dir = dir;
  const auto rows = run_experiment({bundled()[0]}, {"fifo", "rank_min_rr"}, hetero4(), options);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(std::filesystem::exists(dir / "W1__fifo__42.ndjson"));
  EXPECT_TRUE(std::filesystem::exists(dir / "W1__rank_min_rr__42.ndjson"));
  EXPECT_EQ(rows[0].decision_log_path, (dir / "W1__fifo__42.ndjson").string());
  EXPECT_GT(std::filesystem::file_size(dir / "W1__fifo__42.ndjson"), 0u);
  std::filesystem::remove_all(dir);
}

TEST(Csv, RoundTrip) {
  const auto rows = run_experiment(bundled(), {"fifo", "rank_min_rr"}, hetero4());
  const auto text = to_csv(rows);
  EXPECT_EQ(text.rfind("workload,strategy,seed,makespan_s,failed,wastage\n", 0), 0u);
  const auto parsed = parse_csv(text);
  ASSERT_EQ(parsed.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(parsed[i].workload, rows[i].workload);
    EXPECT_EQ(parsed[i].strategy, rows[i].strategy);
    EXPECT_EQ(parsed[i].seed, rows[i].seed);
    EXPECT_DOUBLE_EQ(parsed[i].makespan_s, rows[i].makespan_s);
    EXPECT_EQ(parsed[i].failed, rows[i].failed);
    EXPECT_DOUBLE_EQ(parsed[i].wastage, rows[i].wastage);
  }
  EXPECT_EQ(to_csv(parsed), text);
}

TEST(Csv, RejectsMalformedInput) {
  EXPECT_EQ(code_of([] { parse_csv("a,b\n"); }), ErrorCode::kValidation);
  const std::string header = "workload,strategy,seed,makespan_s,failed,wastage\n";
  EXPECT_EQ(code_of([&] { parse_csv(header + "W1,fifo,42,1.0\n"); }), ErrorCode::kValidation);
  EXPECT_EQ(code_of([&] { parse_csv(header + "W1,fifo,x,1.0,0,0\n"); }), ErrorCode::kValidation);
  EXPECT_TRUE(parse_csv(header).empty());
}

TEST(Report, LabelsBaselineAndDelta) {
  std::vector<ExperimentRow> rows{
      {"W1", "fifo", 1, 40.0, 0, 0, 0, ""},
      {"W1", "rank_min_rr", 1, 30.0, 0, 0, 0, ""},
  };
  const auto report = baseline_report(rows);
  EXPECT_NE(report.find("baseline (fifo with round-robin placement)"), std::string::npos);
  EXPECT_NE(report.find("-25.00%"), std::string::npos);
}

TEST(Generator, ChainExample) {
  const auto w = generate_workload(WorkloadShape::kChain, 3, 7);
  ASSERT_EQ(w.tasks.size(), 3u);
  std::size_t edges = 0;
  for (const auto& t : w.tasks) edges += t.spec.depends_on.size();
  EXPECT_EQ(edges, 2u);
  EXPECT_EQ(generate_workload(WorkloadShape::kChain, 3, 7), w);
  EXPECT_NE(generate_workload(WorkloadShape::kChain, 3, 8), w);
}

TEST(Generator, ForkJoinShape) {
  const auto w = generate_workload(WorkloadShape::kForkJoin, 10, 1);
  ASSERT_EQ(w.tasks.size(), 10u);
  std::set<std::string> has_successor;
  std::size_t sources = 0;
  for (const auto& t : w.tasks) {
    if (t.spec.depends_on.empty()) ++sources;
    for (const auto& d : t.spec.depends_on) has_successor.insert(d);
  }
  EXPECT_EQ(sources, 1u);
  EXPECT_EQ(has_successor.size(), 9u);  // every task but the sink
  std::size_t middle = 0;
  for (const auto& t : w.tasks) {
    if (t.spec.depends_on.size() == 1 && has_successor.count(t.spec.task_id)) ++middle;
  }
  EXPECT_EQ(middle, 8u);
}

TEST(Generator, ValuesStayInRange) {
  const auto w = generate_workload(WorkloadShape::kDiamondMesh, 60, 3);
  for (const auto& t : w.tasks) {
    EXPECT_GE(t.truth.true_runtime_s, Seconds(10));
    EXPECT_LE(t.truth.true_runtime_s, Seconds(600));
    EXPECT_LE(t.truth.true_peak_memory_bytes, t.spec.memory_request_bytes);
    EXPECT_GE(t.spec.memory_request_bytes, 256 * kMiB);
    EXPECT_LE(t.spec.memory_request_bytes, 8 * kGiB);
  }
  EXPECT_NO_THROW(validate(w));
}

TEST(Generator, RejectsBadArguments) {
  EXPECT_EQ(code_of([] { generate_workload(WorkloadShape::kChain, 0, 1); }), ErrorCode::kValidation);
  EXPECT_EQ(code_of([] { workload_shape_from_string("spiral"); }), ErrorCode::kValidation);
}

// Chains and independent sets release tasks in the same order whether the
// DAG is submitted whole or revealed as inputs appear.
TEST(RevealMode, InvariantWhereOrderIsForced) {
  for (const auto& base : {generate_workload(WorkloadShape::kChain, 8, 4), [] {
         WorkloadDef w;
         w.name = "independent";
         for (int i = 0; i < 6; ++i) w.tasks.push_back(sim_task("t" + std::to_string(i), "p", {}, 5 + i));
         return w;
       }()}) {
    auto incremental = base;
    incremental.reveal_mode = RevealMode::kIncremental;
    for (const auto& s : strategy_names()) {
      const auto full = run_simulation(hetero4(), base, s).result;
      const auto inc = run_simulation(hetero4(), incremental, s).result;
      EXPECT_EQ(full.makespan, inc.makespan) << base.name << " " << s;
      EXPECT_EQ(full.event_log(), inc.event_log()) << base.name << " " << s;
    }
  }
}

TEST(Parsing, CycleIsNamed) {
  const std::string text = R"({"workflow":"w","tasks":[
    {"task_id":"A","process_name":"p","cpu_request":1,"memory_request_bytes":1,"depends_on":["B"],
     "sim_truth":{"true_runtime_s":1,"true_peak_memory_bytes":1}},
    {"task_id":"B","process_name":"p","cpu_request":1,"memory_request_bytes":1,"depends_on":["A"],
     "sim_truth":{"true_runtime_s":1,"true_peak_memory_bytes":1}}]})";
  EXPECT_EQ(code_of([&] { parse_workload(text); }), ErrorCode::kCycle);
  const auto message = message_of([&] { parse_workload(text); });
  EXPECT_NE(message.find("A"), std::string::npos);
  EXPECT_NE(message.find("B"), std::string::npos);
}

TEST(Parsing, SyntaxErrorReportsLineAndColumn) {
  const auto message = message_of([] { parse_workload("{\n  \"workflow\": \"w\",\n  \"tasks\": [,]\n}"); });
  EXPECT_NE(message.find("line 3"), std::string::npos) << message;
  EXPECT_NE(message.find("column"), std::string::npos) << message;
}

TEST(Parsing, EmptyWorkloadIsValidAndRoundTrips) {
  const auto w = parse_workload(R"({"workflow":"empty","tasks":[]})");
  EXPECT_TRUE(w.tasks.empty());
  EXPECT_EQ(parse_workload(dump_workload(w)), w);
  for (const auto& b : bundled()) EXPECT_EQ(parse_workload(dump_workload(b)), b);
}

TEST(Parsing, RejectsBadTruth) {
  const std::string text = R"({"workflow":"w","tasks":[
    {"task_id":"A","process_name":"p","cpu_request":1,"memory_request_bytes":1,
     "sim_truth":{"true_runtime_s":0,"true_peak_memory_bytes":1}}]})";
  EXPECT_EQ(code_of([&] { parse_workload(text); }), ErrorCode::kValidation);
  EXPECT_EQ(code_of([] { parse_workload(R"({"workflow":"w","tasks":[{"task_id":"A"}]})"); }),
            ErrorCode::kValidation);
}

class LiveServer : public ::testing::Test {
 protected:
  void start(const std::string& token = "token") {
    service_ = std::make_unique<CwsService>(hetero4());
    server_ = std::make_unique<CwsServer>(*service_, ServerOptions{"127.0.0.1", 0, token, 4});
    port_ = server_->start();
  }
  void TearDown() override {
    if (server_) server_->stop();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  std::unique_ptr<CwsService> service_;
  std::unique_ptr<CwsServer> server_;
  int port_ = 0;
};

TEST_F(LiveServer, WirePathMatchesInProcessForEveryCell) {
  for (const auto& w : bundled()) {
    for (const auto& s : strategy_names()) {
      start();
      SimResult live;
      {
        // The client closes its keep-alive connection before the server stops.
        HttpClient client(url(), {"token"});
        live = drive_live_server(client, hetero4(), w, s);
      }
      const auto local = run_simulation(hetero4(), w, s).result;
      EXPECT_EQ(live.makespan, local.makespan) << w.name << " " << s;
      EXPECT_EQ(live.event_log(), local.event_log()) << w.name << " " << s;
      server_->stop();
      server_.reset();
    }
  }
}

TEST_F(LiveServer, WrongTokenIsRejected) {
  start();
  HttpClient client(url(), {"nope"});
  EXPECT_EQ(code_of([&] { drive_live_server(client, hetero4(), bundled()[0], "fifo"); }), ErrorCode::kUnauthorized);
}

TEST(LiveServerAbsent, TransportError) {
  int port = 0;
  {
    CwsService service(hetero4());
    CwsServer server(service, {"127.0.0.1", 0, "", 1});
    port = server.start();
    server.stop();
  }
  HttpClientOptions options;
  options.max_retries = 0;
  options.connect_timeout = std::chrono::milliseconds(200);
  HttpClient client("http://127.0.0.1:" + std::to_string(port), options);
  EXPECT_EQ(code_of([&] { drive_live_server(client, hetero4(), bundled()[0], "fifo"); }), ErrorCode::kTransport);
}

}  // namespace
}  // namespace cws

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "cws/error.hpp"
#include "cws/workflow.hpp"
#include "support/oracles.hpp"

namespace cws {
namespace {

TaskSpec spec(const std::string& id, std::vector<std::string> deps = {}, Bytes input = 0) {
  TaskSpec s;
  s.task_id = id;
  s.process_name = "proc_" + id;
  s.cpu_request = MilliCores{1000};
  s.memory_request_bytes = kGiB;
  if (input > 0) s.input_files.push_back({"in/" + id, input});
  s.depends_on = std::move(deps);
  return s;
}

WorkflowDag diamond() {
  WorkflowDag dag("wf");
  dag.add_tasks({spec("A"), spec("B", {"A"}), spec("C", {"A"}), spec("D", {"B", "C"})});
  return dag;
}

void finish(WorkflowDag& dag, const std::string& id, TaskState outcome, std::vector<std::string>* released = nullptr) {
  dag.mark_assigned(id);
  dag.mark_running(id);
  auto r = dag.mark_finished(id, outcome);
  if (released) *released = r;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const CwsError& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected a CwsError";
  return ErrorCode::kInternal;
}

TEST(WorkflowDag, EmptyOnCreation) {
  WorkflowDag dag("wf-1");
  EXPECT_EQ(dag.size(), 0u);
  EXPECT_EQ(dag.workflow_id(), "wf-1");
}

TEST(WorkflowDag, EmptyIdRejected) {
  EXPECT_EQ(code_of([] { WorkflowDag dag(""); }), ErrorCode::kValidation);
}

TEST(WorkflowDag, TaskWithoutDependenciesIsReady) {
  WorkflowDag dag("wf");
  const auto ready = dag.add_task(spec("A"));
  EXPECT_EQ(ready, std::vector<std::string>{"A"});
  EXPECT_EQ(dag.state("A"), TaskState::kReady);
}

TEST(WorkflowDag, TaskWithPendingDependencyIsSubmitted) {
  WorkflowDag dag("wf");
  dag.add_task(spec("A"));
  dag.add_task(spec("B", {"A"}));
  EXPECT_EQ(dag.state("B"), TaskState::kSubmitted);
}

TEST(WorkflowDag, DependencyOnSucceededTaskIsReadyImmediately) {
  WorkflowDag dag("wf");
  dag.add_task(spec("A"));
  finish(dag, "A", TaskState::kSucceeded);
  dag.add_task(spec("B", {"A"}));
  EXPECT_EQ(dag.state("B"), TaskState::kReady);
}

TEST(WorkflowDag, BackEdgeIntoDiamondNamesTheCycle) {
  auto dag = diamond();
  try {
    dag.add_edges({{"D", "A"}});
    FAIL() << "cycle accepted";
  } catch (const CwsError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCycle);
    EXPECT_EQ(e.details(), std::vector<std::string>{"(D,A)"});
  }
  EXPECT_EQ(dag.physical_edges().count({"D", "A"}), 0u);
}

TEST(WorkflowDag, UnknownDependencyRejectsWholeBatch) {
  WorkflowDag dag("wf");
  try {
    dag.add_tasks({spec("A"), spec("B", {"ghost"})});
    FAIL();
  } catch (const CwsError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
    ASSERT_FALSE(e.details().empty());
    EXPECT_NE(e.details().front().find("ghost"), std::string::npos);
  }
  EXPECT_EQ(dag.size(), 0u);
}

TEST(WorkflowDag, CyclicBatchAcceptsNothing) {
  WorkflowDag dag("wf");
  EXPECT_EQ(code_of([&] { dag.add_tasks({spec("P", {"Q"}), spec("Q", {"P"}), spec("R")}); }), ErrorCode::kCycle);
  EXPECT_EQ(dag.size(), 0u);
}

TEST(WorkflowDag, BatchMayReferenceLaterMembers) {
  WorkflowDag dag("wf");
  const auto ready = dag.add_tasks({spec("B", {"A"}), spec("A")});
  EXPECT_EQ(ready, std::vector<std::string>{"A"});
  EXPECT_EQ(dag.submission_index("B"), 0u);
}

TEST(WorkflowDag, DuplicateIdsAndSelfLoopsRejected) {
  WorkflowDag dag("wf");
  dag.add_task(spec("A"));
  EXPECT_EQ(code_of([&] { dag.add_task(spec("A")); }), ErrorCode::kValidation);
  EXPECT_EQ(code_of([&] { dag.add_task(spec("S", {"S"})); }), ErrorCode::kValidation);
  auto bad = spec("Z");
  bad.cpu_request = MilliCores{0};
  EXPECT_EQ(code_of([&] { dag.add_task(bad); }), ErrorCode::kValidation);
  bad = spec("Z");
  bad.memory_request_bytes = 0;
  EXPECT_EQ(code_of([&] { dag.add_task(bad); }), ErrorCode::kValidation);
}

TEST(WorkflowDag, FinishingReleasesExactlyReadySuccessors) {
  auto dag = diamond();
  std::vector<std::string> released;
  finish(dag, "A", TaskState::kSucceeded, &released);
  EXPECT_EQ(std::set<std::string>(released.begin(), released.end()), (std::set<std::string>{"B", "C"}));
  finish(dag, "B", TaskState::kSucceeded, &released);
  EXPECT_TRUE(released.empty());
  finish(dag, "C", TaskState::kSucceeded, &released);
  EXPECT_EQ(released, std::vector<std::string>{"D"});
}

TEST(WorkflowDag, FailureDoesNotReleaseSuccessors) {
  auto dag = diamond();
  std::vector<std::string> released;
  finish(dag, "A", TaskState::kFailed, &released);
  EXPECT_TRUE(released.empty());
  EXPECT_EQ(dag.state("B"), TaskState::kSubmitted);
  EXPECT_EQ(dag.state("C"), TaskState::kSubmitted);
}

TEST(WorkflowDag, IllegalTransitionsRejected) {
  auto dag = diamond();
  EXPECT_EQ(code_of([&] { dag.mark_finished("A", TaskState::kSucceeded); }), ErrorCode::kIllegalTransition);
  finish(dag, "A", TaskState::kSucceeded);
  EXPECT_EQ(code_of([&] { dag.mark_finished("A", TaskState::kSucceeded); }), ErrorCode::kIllegalTransition);
  EXPECT_EQ(code_of([&] { dag.mark_running("D"); }), ErrorCode::kIllegalTransition);
  EXPECT_EQ(code_of([&] { dag.state("nope"); }), ErrorCode::kNotFound);
}

TEST(WorkflowDag, RequeueOnlyFromFailed) {
  WorkflowDag dag("wf");
  dag.add_task(spec("A"));
  EXPECT_EQ(code_of([&] { dag.requeue("A"); }), ErrorCode::kIllegalTransition);
  finish(dag, "A", TaskState::kFailed);
  dag.requeue("A");
  EXPECT_EQ(dag.state("A"), TaskState::kReady);
}

TEST(WorkflowDag, EdgeOntoReadyTargetBlocksIt) {
  WorkflowDag dag("wf");
  dag.add_tasks({spec("A"), spec("B")});
  dag.add_edges({{"A", "B"}});
  EXPECT_EQ(dag.state("B"), TaskState::kSubmitted);
  std::vector<std::string> released;
  finish(dag, "A", TaskState::kSucceeded, &released);
  EXPECT_EQ(released, std::vector<std::string>{"B"});
}

TEST(WorkflowDag, EdgeOntoDispatchedTargetRejected) {
  WorkflowDag dag("wf");
  dag.add_tasks({spec("A"), spec("B")});
  dag.mark_assigned("B");
  EXPECT_EQ(code_of([&] { dag.add_edges({{"A", "B"}}); }), ErrorCode::kValidation);
  EXPECT_EQ(code_of([&] { dag.add_edges({{"A", "ghost"}}); }), ErrorCode::kValidation);
}

TEST(WorkflowDag, AbstractEdgesAreMetadataOnly) {
  WorkflowDag dag("wf");
  dag.add_tasks({spec("A"), spec("B")});
  dag.add_abstract_edges({{"align", "sort"}});
  EXPECT_EQ(dag.abstract_edges().count({"align", "sort"}), 1u);
  EXPECT_EQ(dag.state("B"), TaskState::kReady);
}

TEST(Ranks, Diamond) {
  const auto ranks = compute_ranks(diamond());
  EXPECT_EQ(ranks.at("A"), 2);
  EXPECT_EQ(ranks.at("B"), 1);
  EXPECT_EQ(ranks.at("C"), 1);
  EXPECT_EQ(ranks.at("D"), 0);
}

TEST(Ranks, SingleTaskAndChainWithIsolated) {
  WorkflowDag one("wf");
  one.add_task(spec("T"));
  EXPECT_EQ(compute_ranks(one).at("T"), 0);

  WorkflowDag dag("wf");
  dag.add_tasks({spec("X"), spec("A"), spec("B", {"A"}), spec("C", {"B"})});
  const auto ranks = compute_ranks(dag);
  EXPECT_EQ(ranks.at("A"), 2);
  EXPECT_EQ(ranks.at("B"), 1);
  EXPECT_EQ(ranks.at("C"), 0);
  EXPECT_EQ(ranks.at("X"), 0);
}

TEST(Ranks, MatchEnumerationOnRandomDags) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(1, 50);
  std::uniform_real_distribution<double> density(0.05, 0.25);
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = testing::random_dag(rng, size(rng), density(rng));
    WorkflowDag dag("wf");
    dag.add_tasks(testing::dag_specs(g));
    const auto ranks = compute_ranks(dag);
    for (const auto& [id, expected] : testing::brute_force_ranks(g)) {
      ASSERT_EQ(ranks.at(id), expected) << "trial " << trial << " task " << id;
    }
  }
}

TEST(WeightedRanks, ChainAndSink) {
  WorkflowDag dag("wf");
  dag.add_tasks({spec("A"), spec("B", {"A"})});
  const auto w = weighted_ranks(dag, {{"A", 10.0}, {"B", 20.0}});
  EXPECT_DOUBLE_EQ(w.at("B"), 20.0);
  EXPECT_DOUBLE_EQ(w.at("A"), 30.0);

  WorkflowDag one("wf");
  one.add_task(spec("T"));
  EXPECT_DOUBLE_EQ(weighted_ranks(one, {{"T", 7.0}}).at("T"), 7.0);
}

TEST(WeightedRanks, UnitEstimatesGiveRankPlusOne) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = testing::random_dag(rng, 30, 0.2);
    WorkflowDag dag("wf");
    dag.add_tasks(testing::dag_specs(g));
    std::unordered_map<std::string, double> ones;
    for (const auto& id : g.ids) ones[id] = 1.0;
    const auto w = weighted_ranks(dag, ones);
    const auto r = compute_ranks(dag);
    for (const auto& id : g.ids) EXPECT_DOUBLE_EQ(w.at(id), r.at(id) + 1.0);
  }
}

TEST(WeightedRanks, MissingEstimateNamesTask) {
  auto dag = diamond();
  try {
    weighted_ranks(dag, {{"A", 1.0}, {"B", 1.0}, {"C", 1.0}});
    FAIL();
  } catch (const CwsError& e) {
    EXPECT_NE(std::string(e.what()).find("'D'"), std::string::npos);
  }
}

// Random edge insertions: every accepted mutation leaves the graph acyclic,
// and every rejected one leaves it untouched.
TEST(Properties, AcyclicUnderRandomEdgeInsertions) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    WorkflowDag dag("wf");
    std::vector<TaskSpec> specs;
    for (int i = 0; i < 25; ++i) specs.push_back(spec("t" + std::to_string(i)));
    dag.add_tasks(specs);
    std::uniform_int_distribution<int> pick(0, 24);
    for (int k = 0; k < 150; ++k) {
      const std::string from = "t" + std::to_string(pick(rng));
      const std::string to = "t" + std::to_string(pick(rng));
      const auto before = dag.physical_edges();
      try {
        dag.add_edges({{from, to}});
      } catch (const CwsError&) {
        EXPECT_EQ(dag.physical_edges(), before);
      }
      // compute_ranks throws on a cycle.
      ASSERT_NO_THROW(compute_ranks(dag));
    }
  }
}

TEST(Properties, ReadinessIsMonotoneAndReleaseCountsAddUp) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = testing::random_dag(rng, 40, 0.2);
    WorkflowDag dag("wf");
    const auto initially_ready = dag.add_tasks(testing::dag_specs(g));
    std::set<std::string> ever_ready(initially_ready.begin(), initially_ready.end());
    std::vector<std::string> queue = initially_ready;
    std::size_t released_total = 0;
    while (!queue.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, queue.size() - 1);
      const auto i = pick(rng);
      const std::string id = queue[i];
      queue.erase(queue.begin() + static_cast<std::ptrdiff_t>(i));
      std::vector<std::string> released;
      finish(dag, id, TaskState::kSucceeded, &released);
      released_total += released.size();
      for (const auto& r : released) {
        EXPECT_TRUE(ever_ready.insert(r).second) << r << " released twice";
        queue.push_back(r);
      }
      for (const auto& seen : ever_ready) EXPECT_NE(dag.state(seen), TaskState::kSubmitted) << seen;
    }
    EXPECT_EQ(released_total, g.ids.size() - initially_ready.size());
    EXPECT_EQ(dag.tasks_in_state(TaskState::kSucceeded).size(), g.ids.size());
  }
}

}  // namespace
}  // namespace cws

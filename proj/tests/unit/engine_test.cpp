#include <gtest/gtest.h>

#include "megart/dsl.hpp"
#include "support.hpp"

using namespace megart;
using namespace support;

namespace {

using Strings = std::vector<std::string>;

std::string code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const EngineError& e) {
    return e.code();
  }
  return "";
}

const char* kTwoLoops = R"(architecture "Two" {
  layer 0 "Layer-0" { software mRUBiS : "harness.system" }
  layer 1 "Layer-1" {
    module loopA : "Self-repair-monolithic"
    module loopB : "Self-repair-monolithic"
  }
  sense loopA <- mRUBiS [r] trigger "RtException; 10s; Monitor"
  sense loopB <- mRUBiS [r] trigger "RtException; 10s; Monitor"
  use loopA.Update -> "harness.update"
  use loopA.CheckForFailures -> "harness.checkFailures"
  use loopA.DeepCheck -> "harness.deepCheck"
  use loopA.Repair -> "harness.repair"
  use loopA.Effect -> "harness.effect"
  use loopB.Update -> "harness.update"
  use loopB.CheckForFailures -> "harness.checkFailures"
  use loopB.DeepCheck -> "harness.deepCheck"
  use loopB.Repair -> "harness.repair"
  use loopB.Effect -> "harness.effect"
})";

}  // namespace

TEST(ExecuteRun, NoFailures) {
  Rig rig("ld/self-repair-monolithic.ld");
  RunResult r = rig.engine->execute_run("selfRepair", "Monitor");
  EXPECT_EQ(r.final_state, "Analyzed");
  EXPECT_EQ(rig.op_exits("selfRepair"), (Strings{"Update done", "CheckForFailures no_failures"}));
}

TEST(ExecuteRun, FirstFailingRun) {
  Rig rig("ld/self-repair-monolithic.ld");
  rig.harness.inject_failure("c3", "crash", 0);
  RunResult r = rig.engine->execute_run("selfRepair", "Monitor");
  EXPECT_EQ(r.final_state, "Executed");
  EXPECT_EQ(rig.op_exits("selfRepair"),
            (Strings{"Update done", "CheckForFailures failures", "Repair planned", "Effect done"}));
  EXPECT_EQ(rig.harness.system().components.at("c3").lifecycle, Lifecycle::started);
}

TEST(ExecuteRun, ModularLoopDelegatesAnalysis) {
  Rig rig("ld/self-repair.ld");
  rig.harness.inject_failure("c3", "crash", 0);
  RunResult r = rig.engine->execute_run("selfRepair", "Monitor");
  EXPECT_EQ(r.final_state, "Executed");
  EXPECT_EQ(rig.op_exits("selfRepair"),
            (Strings{"Update done", "Analyze Failures", "Repair planned", "Effect done"}));
  EXPECT_EQ(rig.op_exits("selfRepairA"), (Strings{"CheckForFailures failures"}));
  EXPECT_EQ(rig.engine->instance("selfRepairA")->history.runs.back().final_state, "Failures");
}

TEST(ExecuteRun, UndeclaredExitAbortsTheRun) {
  Rig rig("ld/self-repair-monolithic.ld");
  rig.software.add("harness.checkFailures", [](OperationContext&) { return std::string("maybe"); });
  EXPECT_EQ(code_of([&] { rig.engine->execute_run("selfRepair", "Monitor"); }), "E-EXIT-UNKNOWN");
  const ModuleInstance* inst = rig.engine->instance("selfRepair");
  EXPECT_FALSE(inst->running);
  ASSERT_EQ(inst->history.runs.size(), 1u);
  EXPECT_TRUE(inst->history.runs[0].aborted);
  EXPECT_EQ(inst->history.runs[0].final_state, kAbortedState);
  EXPECT_EQ(rig.engine->aborted_runs(), 1u);
  EXPECT_FALSE(rig.engine->busy());
}

TEST(ExecuteRun, ReentryIsRejected) {
  Rig rig("ld/self-repair-monolithic.ld");
  std::string inner;
  rig.software.add("harness.update", [&](OperationContext& ctx) {
    inner = code_of([&] { ctx.engine().execute_run("selfRepair", "Monitor"); });
    return std::string("done");
  });
  rig.engine->execute_run("selfRepair", "Monitor");
  EXPECT_EQ(inner, "E-REENTRY");
}

TEST(ExecuteRun, UnknownInitialState) {
  Rig rig("ld/self-repair-monolithic.ld");
  EXPECT_EQ(code_of([&] { rig.engine->execute_run("selfRepair", "Executed"); }), "E-STATE-UNKNOWN");
}

TEST(DispatchBasic, OperationSeesExactlyItsModels) {
  Rig rig("ld/self-repair-monolithic.ld");
  std::map<std::string, bool> seen;
  rig.software.add("harness.update", [&](OperationContext& ctx) {
    for (const char* s : {"TGGRules", "ArchitecturalModel", "FailureAnalysisRules", "RepairStrategies"})
      seen[s] = ctx.has_model(s);
    return std::string("done");
  });
  rig.engine->execute_run("selfRepair", "Monitor");
  EXPECT_TRUE(seen["TGGRules"]);
  EXPECT_TRUE(seen["ArchitecturalModel"]);
  EXPECT_FALSE(seen["FailureAnalysisRules"]);
  EXPECT_FALSE(seen["RepairStrategies"]);
}

TEST(DispatchBasic, AnnotationIsVisibleNextRun) {
  Rig rig("ld/self-repair-monolithic.ld");
  rig.harness.inject_failure("c3", "crash", 0);
  rig.engine->execute_run("selfRepair", "Monitor");
  const RuntimeModel* am = rig.engine->models().find("selfRepair.ArchitecturalModel");
  ASSERT_NE(am, nullptr);
  EXPECT_GT(am->revision, 0u);
  EXPECT_TRUE(am->body.contains("failures"));
  Json seen;
  rig.software.add("harness.update", [&](OperationContext& ctx) {
    seen = ctx.model("ArchitecturalModel").body;
    return std::string("done");
  });
  rig.engine->execute_run("selfRepair", "Monitor");
  EXPECT_EQ(seen["failures"], Json::array({"c3"}));
}

TEST(DispatchBasic, ImplementationExceptionAborts) {
  Rig rig("ld/self-repair-monolithic.ld");
  rig.software.add("harness.repair", [](OperationContext&) -> std::string { throw std::runtime_error("boom"); });
  rig.harness.inject_failure("c1", "crash", 0);
  EXPECT_EQ(code_of([&] { rig.engine->execute_run("selfRepair", "Monitor"); }), "E-OP-FAILED");
  EXPECT_FALSE(rig.engine->instance("selfRepair")->running);
}

TEST(Instantiate, TwoInstancesHaveIndependentHistories) {
  auto rig = Rig::from_text(kTwoLoops);
  rig->engine->execute_run("loopA", "Monitor");
  rig->engine->execute_run("loopA", "Monitor");
  EXPECT_EQ(rig->engine->instance("loopA")->history.runs.size(), 2u);
  EXPECT_TRUE(rig->engine->instance("loopB")->history.runs.empty());
  EXPECT_NE(rig->engine->models().find("loopA.ArchitecturalModel"), nullptr);
  EXPECT_NE(rig->engine->models().find("loopB.ArchitecturalModel"), nullptr);
}

TEST(Instantiate, Errors) {
  Rig rig("ld/self-repair.ld");
  EXPECT_EQ(code_of([&] { rig.engine->instantiate("Self-repair-A", "selfRepair"); }), "E-NAME-DUP");
  EXPECT_EQ(code_of([&] { rig.engine->instantiate("Self-repair-A", "another"); }), "E-BIND-MISSING");
  EXPECT_EQ(code_of([&] { rig.engine->instantiate("No-such", "x"); }), "E-MODULE-REF");
}

TEST(LoadArchitecture, AnalyzeUnboundIsRejected) {
  Rig rig("ld/self-repair.ld");
  ArchitectureDecl a = fixture_ld("ld/self-repair.ld");
  std::erase_if(a.uses, [](const UseEdge& u) { return u.operation == "Analyze"; });
  VirtualClock clock;
  Engine e(clock, rig.software);
  for (const auto& [n, m] : fixture_registry()) e.add_megamodel(m);
  e.set_event_types(Harness::default_event_types());
  EXPECT_TRUE(has_code(e.load_architecture(a), "E-BIND-MISSING"));
  EXPECT_TRUE(e.instance_names().empty());
}

TEST(RouteComplex, SelfManagementOneRoutesByExit) {
  Rig rig("ld/self-management-1.ld");
  rig.engine->execute_run("selfManagement1", "Start");
  EXPECT_EQ(rig.op_exits("selfManagement1"), (Strings{"Repair Analyzed", "Optimize Analyzed"}));
  EXPECT_EQ(rig.op_starts("selfOptimization"), (Strings{"AnalyzeBottleneck"}));

  rig.engine->clear_logs();
  rig.harness.inject_failure("c2", "crash", 0);
  rig.engine->execute_run("selfManagement1", "Start");
  EXPECT_EQ(rig.op_exits("selfManagement1"), (Strings{"Repair Executed", "Optimize Analyzed"}));
  EXPECT_EQ(rig.op_starts("selfOptimization"), (Strings{"Update", "AnalyzeBottleneck"}));
  EXPECT_EQ(rig.engine->instance("selfOptimization")->history.runs.back().initial_state, "Monitor");
}

TEST(ModelStore, NoOrphansAfterRuns) {
  Rig rig("ld/self-repair.ld");
  for (int i = 0; i < 5; ++i) {
    if (i % 2) rig.harness.inject_failure("c" + std::to_string(i + 1), "crash", 0);
    rig.engine->execute_run("selfRepair", "Monitor");
  }
  std::set<std::string> referenced;
  for (const std::string& n : rig.engine->instance_names())
    for (const auto& [slot, id] : rig.engine->instance(n)->model_ids) referenced.insert(id);
  for (const std::string& id : rig.engine->models().ids()) EXPECT_TRUE(referenced.count(id)) << id;
  for (const std::string& id : referenced) EXPECT_NE(rig.engine->models().find(id), nullptr) << id;
}

// Every consecutive pair of operations in a run follows a flow, possibly
// through a decision.
TEST(ControlFlow, TracesFollowFlows) {
  Rig rig("ld/self-repair-monolithic.ld");
  Megamodel m = fixture_fld("fld/self-repair-monolithic.fld");
  std::mt19937_64 rng(3);
  for (int i = 0; i < 60; ++i) {
    if (rng() % 3 == 0) rig.harness.inject_failure("c" + std::to_string(1 + rng() % 9), rng() % 4 ? "crash" : "poison", 0);
    rig.engine->execute_run("selfRepair", "Monitor");
  }
  for (const RunRecord& r : rig.engine->instance("selfRepair")->history.runs) {
    for (std::size_t k = 0; k + 1 < r.ops.size(); ++k) {
      const Endpoint* t = m.flow_from(Endpoint{r.ops[k].op, r.ops[k].exit});
      ASSERT_NE(t, nullptr);
      std::set<std::string> allowed{t->node};
      if (const DecisionNode* d = m.find_decision(t->node))
        for (const DecisionBranch& b : d->branches) allowed.insert(b.target.node);
      EXPECT_TRUE(allowed.count(r.ops[k + 1].op)) << r.ops[k].op << " -> " << r.ops[k + 1].op;
    }
    const Endpoint* last = m.flow_from(Endpoint{r.ops.back().op, r.ops.back().exit});
    ASSERT_NE(last, nullptr);
    EXPECT_EQ(last->node, r.final_state);
  }
}

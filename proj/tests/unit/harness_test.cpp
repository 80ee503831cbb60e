#include <gtest/gtest.h>

#include "support.hpp"

using namespace megart;
using namespace support;

namespace {

std::string code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const EngineError& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST(Harness, InjectCrash) {
  Harness h;
  Event e = h.inject_failure("c3", "crash", 5);
  EXPECT_EQ(h.system().components.at("c3").lifecycle, Lifecycle::failed);
  EXPECT_EQ(e.type, "RtException");
  EXPECT_EQ(e.source, "mRUBiS");
  EXPECT_EQ(e.timestamp, 5);
  EXPECT_EQ(h.event_log().size(), 1u);
}

TEST(Harness, InjectUnknownComponent) {
  Harness h;
  EXPECT_EQ(code_of([&] { h.inject_failure("c99", "crash", 0); }), "E-NO-COMPONENT");
  EXPECT_TRUE(h.event_log().empty());
}

TEST(Harness, OutOfMemoryStillMatchesRtException) {
  Rig rig("ld/self-repair-monolithic.ld");
  Event e = rig.harness.inject_failure("c3", "oom", 0);
  EXPECT_EQ(e.type, "OutOfMemoryRtException");
  rig.engine->on_event(e);
  EXPECT_EQ(rig.engine->pending().size(), 1u);
}

TEST(Harness, LoadIncreaseOnlyWhenRising) {
  Harness h;
  EXPECT_TRUE(h.set_load(0.9, 0));
  EXPECT_FALSE(h.set_load(0.5, 0));
}

TEST(Harness, RequestHitsFailedComponent) {
  Harness h;
  EXPECT_FALSE(h.request(0));
  h.inject_failure("c7", "oom", 0);
  std::optional<Event> e = h.request(1);
  ASSERT_TRUE(e);
  EXPECT_EQ(e->type, "OutOfMemoryRtException");
  EXPECT_EQ(e->payload["component"], "c7");
}

TEST(Harness, CrashIsRepairedEndToEnd) {
  Rig rig("ld/self-repair-monolithic.ld");
  rig.harness.inject_failure("c3", "crash", 0);
  rig.engine->execute_run("selfRepair", "Monitor");
  EXPECT_EQ(rig.harness.system().components.at("c3").lifecycle, Lifecycle::started);
  rig.engine->execute_run("selfRepair", "Monitor");
  EXPECT_EQ(rig.op_exits("selfRepair").back(), "CheckForFailures no_failures");
}

TEST(Harness, NovelFailureHasNoStrategy) {
  Rig rig("ld/self-repair-monolithic.ld");
  rig.harness.inject_failure("c3", "poison", 0);
  rig.engine->execute_run("selfRepair", "Monitor");
  std::vector<std::string> ops = rig.op_exits("selfRepair");
  EXPECT_NE(std::find(ops.begin(), ops.end(), "Repair no_strategy"), ops.end());
  EXPECT_EQ(rig.harness.system().components.at("c3").lifecycle, Lifecycle::failed);
}

// The architectural model mirrors the system after Update.
TEST(Harness, UpdateIsFaithful) {
  Rig rig("ld/self-repair-monolithic.ld");
  rig.harness.inject_failure("c5", "poison", 0);
  rig.harness.set_load(0.6, 0);
  rig.engine->execute_run("selfRepair", "Monitor");
  const Json& am = rig.engine->models().find("selfRepair.ArchitecturalModel")->body;
  Json p = rig.harness.system().projection();
  EXPECT_EQ(am["components"], p["components"]);
  EXPECT_EQ(am["connectors"], p["connectors"]);
  EXPECT_EQ(am["load"], p["load"]);
}

TEST(Harness, HealthySystemIsLeftAlone) {
  Rig rig("ld/self-repair-monolithic.ld");
  SystemState before = rig.harness.system();
  for (int i = 0; i < 3; ++i) rig.engine->execute_run("selfRepair", "Monitor");
  EXPECT_EQ(rig.harness.system(), before);
}

TEST(Harness, EffectWithoutPlanIsIdempotent) {
  Rig rig("ld/self-repair-monolithic.ld");
  rig.harness.inject_failure("c2", "crash", 0);
  rig.engine->execute_run("selfRepair", "Monitor");
  SystemState after = rig.harness.system();
  rig.engine->execute_run("selfRepair", "Monitor");
  EXPECT_EQ(rig.harness.system(), after);
}

TEST(Harness, DeterministicAcrossRigs) {
  auto drive = [](Rig& rig) {
    for (int i = 0; i < 40; ++i) {
      Ticks t = i * 2 * kTicksPerSecond;
      rig.clock.advance_to(t);
      if (i % 5 == 0) rig.engine->on_event(rig.harness.inject_failure("c" + std::to_string(1 + i % 9), i % 10 ? "crash" : "poison", t));
      rig.drain(t + 2 * kTicksPerSecond - 1);
    }
  };
  Rig a("ld/self-repair-strategies.ld"), b("ld/self-repair-strategies.ld");
  drive(a);
  drive(b);
  EXPECT_EQ(a.harness.dispatch_log(), b.harness.dispatch_log());
  EXPECT_EQ(a.harness.event_log(), b.harness.event_log());
  EXPECT_EQ(a.harness.system(), b.harness.system());
}

TEST(Harness, MissingModelIsReported) {
  Rig rig("ld/self-repair-monolithic.ld");
  rig.engine->models().remove("selfRepair.RepairStrategies");
  rig.harness.inject_failure("c1", "crash", 0);
  EXPECT_EQ(code_of([&] { rig.engine->execute_run("selfRepair", "Monitor"); }), "E-MODEL-MISSING");
}

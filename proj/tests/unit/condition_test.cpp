#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "megart/condition.hpp"
#include "support.hpp"

using namespace megart;
using namespace support;

namespace {

cond::ExprPtr parse(const std::string& text) {
  Parsed<cond::ExprPtr> e = cond::parse_condition(text);
  if (!e) throw std::runtime_error(text + ": " + format_diagnostic(e.diagnostics.front()));
  return *e;
}

RunRecord run_with(std::uint64_t index, std::vector<OpExecution> ops) {
  RunRecord r;
  r.run_index = index;
  r.start = static_cast<Ticks>(index) * kTicksPerSecond;
  r.end = r.start + 1000;
  r.initial_state = "Monitor";
  r.final_state = "Executed";
  r.ops = std::move(ops);
  return r;
}

OpExecution exec(const std::string& op, const std::string& exit, Ticks end = 0) { return {op, exit, end, end}; }

}  // namespace

TEST(ParseCondition, Comparison) {
  cond::ExprPtr e = parse("runsSince(CheckForFailures -> no_failures) > 5");
  const auto* c = std::get_if<cond::Compare>(&e->node);
  ASSERT_NE(c, nullptr);
  EXPECT_EQ(c->op, cond::CompareOp::gt);
  const auto* a = std::get_if<cond::Atom>(&c->lhs->node);
  ASSERT_NE(a, nullptr);
  EXPECT_EQ(a->kind, cond::AtomKind::runs_since);
  EXPECT_EQ(a->op, "CheckForFailures");
  EXPECT_EQ(a->exit, "no_failures");
}

TEST(ParseCondition, Tautology) {
  ExecutionHistory h;
  EXPECT_TRUE(cond::eval_condition(*parse("runCount() >= 0"), h, nullptr, 0));
}

TEST(ParseCondition, Malformed) {
  Parsed<cond::ExprPtr> e = cond::parse_condition("executions(Update) >");
  EXPECT_FALSE(e);
  EXPECT_TRUE(has_code(e.diagnostics, "E-COND-SYNTAX"));
}

TEST(ParseCondition, NumericConditionIsATypeError) {
  EXPECT_FALSE(cond::parse_condition("runCount()"));
  EXPECT_FALSE(cond::parse_condition("runCount() and runCount() > 1"));
}

TEST(ParseCondition, CanonicalRenderingReparses) {
  for (std::string text : {"not (executions(A) == 0 or secondsSince(B -> x) < 2.5)",
                           "runsSince(C -> y) >= 3 and runCount() != 1", "executions(A -> b) <= 4"}) {
    cond::ExprPtr e = parse(text);
    std::string canon = cond::to_string(*e);
    EXPECT_EQ(cond::to_string(*parse(canon)), canon);
  }
}

TEST(EvalCondition, SixRunsSinceLastCleanCheck) {
  ExecutionHistory h;
  h.runs.push_back(run_with(1, {exec("CheckForFailures", "no_failures")}));
  for (std::uint64_t i = 2; i <= 6; ++i) h.runs.push_back(run_with(i, {exec("CheckForFailures", "failures")}));
  RunRecord current = run_with(7, {exec("CheckForFailures", "failures")});
  cond::ExprPtr e = parse("runsSince(CheckForFailures -> no_failures) > 5");
  EXPECT_EQ(cond::eval_numeric(*std::get<cond::Compare>(e->node).lhs, h, &current, 0), 6);
  EXPECT_TRUE(cond::eval_condition(*e, h, &current, 0));
}

TEST(EvalCondition, NeverIsInfinite) {
  ExecutionHistory h;
  EXPECT_TRUE(cond::eval_condition(*parse("runsSince(CheckForFailures -> no_failures) > 5"), h, nullptr, 0));
  EXPECT_TRUE(cond::eval_condition(*parse("secondsSince(Update) > 1000000"), h, nullptr, 0));
  EXPECT_TRUE(cond::eval_condition(*parse("executions(Update) == 0"), h, nullptr, 0));
}

TEST(EvalCondition, SecondsSince) {
  ExecutionHistory h;
  h.runs.push_back(run_with(1, {exec("Update", "done", 2 * kTicksPerSecond)}));
  cond::ExprPtr e = parse("secondsSince(Update) == 3");
  EXPECT_TRUE(cond::eval_condition(*e, h, nullptr, 5 * kTicksPerSecond));
}

TEST(EvalCondition, AbortedRunsAreInvisible) {
  ExecutionHistory h;
  h.runs.push_back(run_with(1, {exec("CheckForFailures", "no_failures")}));
  RunRecord bad = run_with(2, {exec("CheckForFailures", "no_failures")});
  bad.aborted = true;
  bad.final_state = kAbortedState;
  h.runs.push_back(bad);
  EXPECT_TRUE(cond::eval_condition(*parse("executions(CheckForFailures) == 1"), h, nullptr, 0));
  EXPECT_TRUE(cond::eval_condition(*parse("runCount() == 1"), h, nullptr, 0));
}

// Random histories against a full recount.
TEST(EvalCondition, MatchesBruteForceRecount) {
  std::mt19937_64 rng(11);
  const std::vector<std::string> exits{"a", "b", "c"};
  for (int trial = 0; trial < 200; ++trial) {
    ExecutionHistory h;
    int n = std::uniform_int_distribution<int>(0, 30)(rng);
    for (int i = 0; i < n; ++i) {
      std::vector<OpExecution> ops;
      for (int k = std::uniform_int_distribution<int>(0, 3)(rng); k > 0; --k)
        ops.push_back(exec(k % 2 ? "Op" : "Other", exits[rng() % 3]));
      RunRecord r = run_with(i + 1, ops);
      if (rng() % 7 == 0) {
        r.aborted = true;
        r.final_state = kAbortedState;
      }
      h.runs.push_back(r);
    }
    RunRecord current = run_with(n + 1, {exec("Op", exits[rng() % 3])});
    for (const RunRecord* cur : std::vector<const RunRecord*>{nullptr, &current}) {
      for (const std::string& x : exits) {
        cond::ExprPtr since = parse("runsSince(Op -> " + x + ") >= 0");
        double got = cond::eval_numeric(*std::get<cond::Compare>(since->node).lhs, h, cur, 0);
        std::optional<std::uint64_t> want = brute_runs_since(h, cur, "Op", x);
        if (want) {
          EXPECT_EQ(got, static_cast<double>(*want));
        } else {
          EXPECT_TRUE(std::isinf(got));
        }
        cond::ExprPtr count = parse("executions(Op -> " + x + ") >= 0");
        EXPECT_EQ(cond::eval_numeric(*std::get<cond::Compare>(count->node).lhs, h, cur, 0),
                  static_cast<double>(brute_executions(h, cur, "Op", x)));
      }
    }
  }
}

// Appending a matching run resets runsSince to 0; each further run adds 1.
TEST(EvalCondition, RunsSinceResetsAndCounts) {
  ExecutionHistory h;
  cond::ExprPtr e = parse("runsSince(Op -> a) >= 0");
  const cond::Expr& atom = *std::get<cond::Compare>(e->node).lhs;
  RunRecord hit = run_with(1, {exec("Op", "a")});
  EXPECT_EQ(cond::eval_numeric(atom, h, &hit, 0), 0);
  h.runs.push_back(hit);
  for (int i = 1; i <= 10; ++i) {
    RunRecord cur = run_with(1 + i, {exec("Op", "b")});
    EXPECT_EQ(cond::eval_numeric(atom, h, &cur, 0), i);
    h.runs.push_back(cur);
  }
}

TEST(EvalCondition, IsPure) {
  ExecutionHistory h;
  h.runs.push_back(run_with(1, {exec("Op", "a")}));
  ExecutionHistory copy = h;
  cond::ExprPtr e = parse("executions(Op) > 0 and runsSince(Op -> a) < 3");
  bool first = cond::eval_condition(*e, h, nullptr, 42);
  EXPECT_EQ(cond::eval_condition(*e, h, nullptr, 42), first);
  EXPECT_EQ(h, copy);
}

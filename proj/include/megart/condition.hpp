#pragma once

// Condition language for decision nodes. Conditions are boolean expressions
// over counter and timing atoms computed from a module instance's execution
// history:
//
//   executions(op)            completed executions of `op`, any exit
//   executions(op -> exit)    completed executions of `op` returning `exit`
//   runsSince(op -> exit)     runs started after the latest run containing a
//                             match, counting the current run; +inf if never
//   secondsSince(op)          now minus end time of the latest match; +inf
//   secondsSince(op -> exit)
//   runCount()                runs including the current one
//
// Aborted runs are invisible to every atom.

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "megart/clock.hpp"
#include "megart/diagnostic.hpp"

namespace megart {

struct OpExecution {
  std::string op;
  std::string exit;
  Ticks start = 0;
  Ticks end = 0;

  bool operator==(const OpExecution&) const = default;
};

inline const std::string kAbortedState = "⊥(error)";

struct RunRecord {
  std::uint64_t run_index = 0;
  Ticks start = 0;
  Ticks end = 0;
  std::string initial_state;
  std::string final_state;
  bool aborted = false;
  std::vector<OpExecution> ops;

  bool operator==(const RunRecord&) const = default;
};

/// Append-only per-instance record of completed runs.
struct ExecutionHistory {
  std::vector<RunRecord> runs;

  bool operator==(const ExecutionHistory&) const = default;
};

namespace cond {

enum class AtomKind { executions, runs_since, seconds_since, run_count };
enum class CompareOp { lt, le, eq, ne, ge, gt };
enum class LogicalOp { and_, or_ };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Literal {
  double value = 0;
};

struct Atom {
  AtomKind kind = AtomKind::run_count;
  std::string op;
  std::string exit;  // empty: any exit
};

struct Compare {
  CompareOp op = CompareOp::eq;
  ExprPtr lhs;
  ExprPtr rhs;
};

struct Logical {
  LogicalOp op = LogicalOp::and_;
  ExprPtr lhs;
  ExprPtr rhs;
};

struct Not {
  ExprPtr operand;
};

struct Expr {
  std::variant<Literal, Atom, Compare, Logical, Not> node;
  int col_begin = 1;  // 1-based, relative to the condition text
  int col_end = 1;

  bool is_boolean() const {
    return !std::holds_alternative<Literal>(node) && !std::holds_alternative<Atom>(node);
  }
};

/// Parses and type-checks a condition. The result is always boolean-typed.
/// Diagnostic spans are `where` shifted by the column inside `text`.
Parsed<ExprPtr> parse_condition(std::string_view text, const SourceSpan& where = {});

/// Canonical rendering; parse_condition(to_string(e)) is structurally equal to e.
std::string to_string(const Expr& e);

/// Every atom in the expression, in source order.
std::vector<const Atom*> atoms_of(const Expr& e);

double eval_numeric(const Expr& e, const ExecutionHistory& history, const RunRecord* current,
                    Ticks now);

/// Evaluates `e` against `history` plus the in-flight run `current` (whose
/// completed operation executions are visible). Pure.
bool eval_condition(const Expr& e, const ExecutionHistory& history, const RunRecord* current,
                    Ticks now);

}  // namespace cond
}  // namespace megart

#include "megart/condition.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace megart::cond {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct CondFailure {
  int col_begin;
  int col_end;
  std::string message;
};

enum class CTok { ident, number, lparen, rparen, arrow, cmp, end };

struct CToken {
  CTok kind;
  std::string text;
  int col_begin;
  int col_end;
};

bool ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
bool digit(char c) { return c >= '0' && c <= '9'; }

std::vector<CToken> lex(std::string_view s) {
  std::vector<CToken> out;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    int col = static_cast<int>(i) + 1;
    if (c == ' ' || c == '\t') {
      ++i;
      continue;
    }
    if (ident_start(c)) {
      std::size_t j = i;
      // Identifiers may contain '-' unless it starts an arrow.
      while (j < s.size() &&
             (ident_char(s[j]) || (s[j] == '-' && !(j + 1 < s.size() && s[j + 1] == '>'))))
        ++j;
      out.push_back({CTok::ident, std::string(s.substr(i, j - i)), col, static_cast<int>(j)});
      i = j;
      continue;
    }
    if (digit(c)) {
      std::size_t j = i;
      while (j < s.size() && (digit(s[j]) || s[j] == '.')) ++j;
      out.push_back({CTok::number, std::string(s.substr(i, j - i)), col, static_cast<int>(j)});
      i = j;
      continue;
    }
    if (c == '(' || c == ')') {
      out.push_back({c == '(' ? CTok::lparen : CTok::rparen, std::string(1, c), col, col});
      ++i;
      continue;
    }
    if (c == '-' && i + 1 < s.size() && s[i + 1] == '>') {
      out.push_back({CTok::arrow, "->", col, col + 1});
      i += 2;
      continue;
    }
    if (c == '<' || c == '>' || c == '=' || c == '!') {
      bool eq = i + 1 < s.size() && s[i + 1] == '=';
      std::string op = eq ? std::string{c, '='} : std::string(1, c);
      if (op == "=" || op == "!") throw CondFailure{col, col, "expected comparison operator"};
      out.push_back({CTok::cmp, op, col, col + static_cast<int>(op.size()) - 1});
      i += op.size();
      continue;
    }
    throw CondFailure{col, col, std::string("unexpected character '") + c + "'"};
  }
  int endcol = static_cast<int>(s.size()) + 1;
  out.push_back({CTok::end, "", endcol, endcol});
  return out;
}

class Parser {
 public:
  explicit Parser(std::vector<CToken> t) : toks_(std::move(t)) {}

  ExprPtr parse() {
    ExprPtr e = parse_or();
    if (peek().kind != CTok::end) fail_here("unexpected '" + peek().text + "'");
    if (!e->is_boolean()) throw CondFailure{e->col_begin, e->col_end, "condition must be boolean"};
    return e;
  }

 private:
  const CToken& peek() const { return toks_[pos_]; }
  const CToken& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool at_word(std::string_view w) const { return peek().kind == CTok::ident && peek().text == w; }

  [[noreturn]] void fail_here(const std::string& msg) {
    const CToken& t = peek();
    throw CondFailure{t.col_begin, t.col_end, t.kind == CTok::end ? msg + " at end of condition" : msg};
  }

  const CToken& expect(CTok k, std::string_view what) {
    if (peek().kind != k) fail_here("expected " + std::string(what));
    return next();
  }

  static ExprPtr make(auto node, int b, int e) {
    auto x = std::make_shared<Expr>();
    x->node = std::move(node);
    x->col_begin = b;
    x->col_end = e;
    return x;
  }

  void require_bool(const ExprPtr& e, std::string_view ctx) {
    if (!e->is_boolean())
      throw CondFailure{e->col_begin, e->col_end, "operand of '" + std::string(ctx) + "' must be boolean"};
  }
  void require_num(const ExprPtr& e) {
    if (e->is_boolean())
      throw CondFailure{e->col_begin, e->col_end, "comparison operand must be numeric"};
  }

  ExprPtr parse_or() {
    ExprPtr lhs = parse_and();
    while (at_word("or")) {
      next();
      ExprPtr rhs = parse_and();
      require_bool(lhs, "or");
      require_bool(rhs, "or");
      lhs = make(Logical{LogicalOp::or_, lhs, rhs}, lhs->col_begin, rhs->col_end);
    }
    return lhs;
  }

  ExprPtr parse_and() {
    ExprPtr lhs = parse_not();
    while (at_word("and")) {
      next();
      ExprPtr rhs = parse_not();
      require_bool(lhs, "and");
      require_bool(rhs, "and");
      lhs = make(Logical{LogicalOp::and_, lhs, rhs}, lhs->col_begin, rhs->col_end);
    }
    return lhs;
  }

  ExprPtr parse_not() {
    if (at_word("not")) {
      int b = next().col_begin;
      ExprPtr operand = parse_not();
      require_bool(operand, "not");
      return make(Not{operand}, b, operand->col_end);
    }
    return parse_cmp();
  }

  ExprPtr parse_cmp() {
    ExprPtr lhs = parse_primary();
    if (peek().kind != CTok::cmp) return lhs;
    std::string op = next().text;
    ExprPtr rhs = parse_primary();
    require_num(lhs);
    require_num(rhs);
    CompareOp c = op == "<"    ? CompareOp::lt
                  : op == "<=" ? CompareOp::le
                  : op == "==" ? CompareOp::eq
                  : op == "!=" ? CompareOp::ne
                  : op == ">=" ? CompareOp::ge
                               : CompareOp::gt;
    return make(Compare{c, lhs, rhs}, lhs->col_begin, rhs->col_end);
  }

  ExprPtr parse_primary() {
    const CToken& t = peek();
    if (t.kind == CTok::number) {
      next();
      double v = 0;
      auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
      if (ec != std::errc() || p != t.text.data() + t.text.size())
        throw CondFailure{t.col_begin, t.col_end, "malformed number '" + t.text + "'"};
      return make(Literal{v}, t.col_begin, t.col_end);
    }
    if (t.kind == CTok::lparen) {
      next();
      ExprPtr inner = parse_or();
      expect(CTok::rparen, "')'");
      return inner;
    }
    if (t.kind == CTok::ident) return parse_atom();
    fail_here("expected number, atom, or '('");
  }

  ExprPtr parse_atom() {
    CToken name = next();
    Atom a;
    bool exit_required = false;
    bool exit_allowed = true;
    if (name.text == "executions") {
      a.kind = AtomKind::executions;
    } else if (name.text == "runsSince") {
      a.kind = AtomKind::runs_since;
      exit_required = true;
    } else if (name.text == "secondsSince") {
      a.kind = AtomKind::seconds_since;
    } else if (name.text == "runCount") {
      a.kind = AtomKind::run_count;
      exit_allowed = false;
    } else {
      throw CondFailure{name.col_begin, name.col_end, "unknown atom '" + name.text + "'"};
    }
    expect(CTok::lparen, "'('");
    if (a.kind != AtomKind::run_count) {
      a.op = expect(CTok::ident, "operation name").text;
      if (peek().kind == CTok::arrow && exit_allowed) {
        next();
        a.exit = expect(CTok::ident, "exit name").text;
      } else if (exit_required) {
        fail_here("expected '->' and exit name");
      }
    }
    int end = expect(CTok::rparen, "')'").col_end;
    return make(std::move(a), name.col_begin, end);
  }

  std::vector<CToken> toks_;
  std::size_t pos_ = 0;
};

std::string fmt_number(double v) {
  if (std::isinf(v)) return "1e308";
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(15);
  os << v;
  return os.str();
}

int precedence(const Expr& e) {
  if (auto* l = std::get_if<Logical>(&e.node)) return l->op == LogicalOp::or_ ? 1 : 2;
  if (std::holds_alternative<Not>(e.node)) return 3;
  if (std::holds_alternative<Compare>(e.node)) return 4;
  return 5;
}

void render(const Expr& e, std::string& out);

void render_child(const Expr& child, int parent_prec, std::string& out) {
  if (precedence(child) < parent_prec) {
    out += "(";
    render(child, out);
    out += ")";
  } else {
    render(child, out);
  }
}

void render(const Expr& e, std::string& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Literal>) {
          out += fmt_number(n.value);
        } else if constexpr (std::is_same_v<T, Atom>) {
          switch (n.kind) {
            case AtomKind::executions: out += "executions("; break;
            case AtomKind::runs_since: out += "runsSince("; break;
            case AtomKind::seconds_since: out += "secondsSince("; break;
            case AtomKind::run_count: out += "runCount("; break;
          }
          out += n.op;
          if (!n.exit.empty()) out += " -> " + n.exit;
          out += ")";
        } else if constexpr (std::is_same_v<T, Compare>) {
          render_child(*n.lhs, 5, out);
          static constexpr const char* ops[] = {" < ", " <= ", " == ", " != ", " >= ", " > "};
          out += ops[static_cast<int>(n.op)];
          render_child(*n.rhs, 5, out);
        } else if constexpr (std::is_same_v<T, Logical>) {
          int p = precedence(e);
          render_child(*n.lhs, p, out);
          out += n.op == LogicalOp::and_ ? " and " : " or ";
          // Left-associative: a right operand of equal precedence needs parens.
          render_child(*n.rhs, p + 1, out);
        } else {
          out += "not ";
          render_child(*n.operand, 3, out);
        }
      },
      e.node);
}

void collect_atoms(const Expr& e, std::vector<const Atom*>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Atom>) {
          out.push_back(&n);
        } else if constexpr (std::is_same_v<T, Compare> || std::is_same_v<T, Logical>) {
          collect_atoms(*n.lhs, out);
          collect_atoms(*n.rhs, out);
        } else if constexpr (std::is_same_v<T, Not>) {
          collect_atoms(*n.operand, out);
        }
      },
      e.node);
}

bool matches(const OpExecution& x, const Atom& a) {
  return x.op == a.op && (a.exit.empty() || x.exit == a.exit);
}

// Visible runs in order: completed non-aborted runs, then the current one.
template <typename Fn>
void for_each_run(const ExecutionHistory& h, const RunRecord* current, Fn&& fn) {
  for (const RunRecord& r : h.runs)
    if (!r.aborted) fn(r);
  if (current != nullptr && !current->aborted) fn(*current);
}

double eval_atom(const Atom& a, const ExecutionHistory& h, const RunRecord* current, Ticks now) {
  switch (a.kind) {
    case AtomKind::run_count: {
      double n = 0;
      for_each_run(h, current, [&](const RunRecord&) { ++n; });
      return n;
    }
    case AtomKind::executions: {
      double n = 0;
      for_each_run(h, current, [&](const RunRecord& r) {
        for (const OpExecution& x : r.ops)
          if (matches(x, a)) ++n;
      });
      return n;
    }
    case AtomKind::runs_since: {
      // Runs visited after the latest run containing a match.
      double since = kInf;
      for_each_run(h, current, [&](const RunRecord& r) {
        bool hit = false;
        for (const OpExecution& x : r.ops) hit = hit || matches(x, a);
        if (hit) {
          since = 0;
        } else if (!std::isinf(since)) {
          since += 1;
        }
      });
      return since;
    }
    case AtomKind::seconds_since: {
      std::optional<Ticks> last;
      for_each_run(h, current, [&](const RunRecord& r) {
        for (const OpExecution& x : r.ops)
          if (matches(x, a)) last = x.end;
      });
      return last ? to_seconds(now - *last) : kInf;
    }
  }
  return 0;
}

}  // namespace

Parsed<ExprPtr> parse_condition(std::string_view text, const SourceSpan& where) {
  Parsed<ExprPtr> out;
  try {
    out.value = Parser(lex(text)).parse();
  } catch (const CondFailure& f) {
    SourceSpan sp = where;
    // Columns are relative to the condition text; shift onto the enclosing
    // string literal (opening quote + 1) when the span is single-line.
    int base = where.line_begin == where.line_end ? where.col_begin : 0;
    sp.line_end = sp.line_begin;
    sp.col_begin = base + f.col_begin;
    sp.col_end = base + std::max(f.col_begin, f.col_end);
    out.diagnostics.push_back(Diagnostic{Severity::error, "E-COND-SYNTAX", f.message, sp, {}});
  }
  return out;
}

std::string to_string(const Expr& e) {
  std::string out;
  render(e, out);
  return out;
}

std::vector<const Atom*> atoms_of(const Expr& e) {
  std::vector<const Atom*> out;
  collect_atoms(e, out);
  return out;
}

double eval_numeric(const Expr& e, const ExecutionHistory& history, const RunRecord* current,
                    Ticks now) {
  if (auto* lit = std::get_if<Literal>(&e.node)) return lit->value;
  if (auto* atom = std::get_if<Atom>(&e.node)) return eval_atom(*atom, history, current, now);
  return eval_condition(e, history, current, now) ? 1.0 : 0.0;
}

bool eval_condition(const Expr& e, const ExecutionHistory& history, const RunRecord* current,
                    Ticks now) {
  if (auto* c = std::get_if<Compare>(&e.node)) {
    double l = eval_numeric(*c->lhs, history, current, now);
    double r = eval_numeric(*c->rhs, history, current, now);
    switch (c->op) {
      case CompareOp::lt: return l < r;
      case CompareOp::le: return l <= r;
      case CompareOp::eq: return l == r;
      case CompareOp::ne: return l != r;
      case CompareOp::ge: return l >= r;
      case CompareOp::gt: return l > r;
    }
  }
  if (auto* l = std::get_if<Logical>(&e.node)) {
    bool a = eval_condition(*l->lhs, history, current, now);
    if (l->op == LogicalOp::and_) return a && eval_condition(*l->rhs, history, current, now);
    return a || eval_condition(*l->rhs, history, current, now);
  }
  if (auto* n = std::get_if<Not>(&e.node)) return !eval_condition(*n->operand, history, current, now);
  return eval_numeric(e, history, current, now) != 0.0;
}

}  // namespace megart::cond

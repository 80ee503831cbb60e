#include "megart/dsl.hpp"

#include <algorithm>
#include <charconv>

#include "dsl_internal.hpp"

namespace megart {

using detail::Cursor;
using detail::fail;
using detail::ParseFailure;
using detail::Tok;
using detail::Token;

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  if (!alpha(s.front())) return false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    bool ok = alpha(c) || (c >= '0' && c <= '9') || (c == '-' && !(i + 1 < s.size() && s[i + 1] == '>'));
    if (!ok) return false;
  }
  return true;
}

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out.push_back(c);
    }
  }
  out += "\"";
  return out;
}

namespace detail {

std::pair<std::string, std::string> parse_named(Cursor& cur, std::string_view what) {
  if (cur.at(Tok::string)) {
    const Token& t = cur.next();
    std::string display = t.text;
    if (display.empty()) fail(t.span, "E-NAME-INVALID", "empty display name");
    cur.expect_word("as");
    return {cur.ident(what), display};
  }
  return {cur.ident(what), {}};
}

Endpoint parse_endpoint(Cursor& cur) {
  Endpoint e;
  e.node = cur.ident("flow endpoint");
  if (cur.accept(Tok::dot)) e.compartment = cur.ident("compartment name");
  return e;
}

namespace {

std::vector<std::string> ident_list(Cursor& cur, std::string_view what) {
  cur.expect(Tok::lbrace, "'{'");
  std::vector<std::string> out;
  if (cur.accept(Tok::rbrace)) return out;
  do {
    out.push_back(cur.ident(what));
  } while (cur.accept(Tok::comma));
  cur.expect(Tok::rbrace, "'}'");
  return out;
}

Operation parse_operation(Cursor& cur, Megamodel& m, bool complex) {
  SourceSpan start = cur.peek().span;
  Operation op;
  op.kind = complex ? OperationKind::complex : OperationKind::basic;
  std::tie(op.name, op.display_name) = parse_named(cur, "operation name");
  if (cur.accept(Tok::open_stereo)) {
    const Token& t = cur.expect(Tok::ident, "activity");
    auto a = activity_from(t.text);
    if (!a) fail(t.span, "E-SYNTAX", "unknown activity '" + t.text + "' (Monitor, Analyze, Plan, Execute)");
    op.activity = *a;
    cur.expect(Tok::close_stereo, "'>>'");
  }
  cur.expect(Tok::lbrace, "'{'");
  if (cur.at_word("entries")) {
    const Token& t = cur.next();
    if (!complex) fail(t.span, "E-OP-ENTRIES", "basic operation '" + op.name + "' cannot declare entries");
    op.entries = ident_list(cur, "entry name");
  }
  cur.expect_word("exits");
  op.exits = ident_list(cur, "exit name");
  while (!cur.at(Tok::rbrace)) {
    const Token& t = cur.expect(Tok::ident, "model usage");
    auto kind = usage_from_keyword(t.text);
    if (!kind) fail(t.span, "E-SYNTAX", "expected creates/destroys/writes/reads/annotates, got '" + t.text + "'");
    op.usages.push_back(ModelUsage{*kind, cur.ident("model name")});
  }
  cur.expect(Tok::rbrace, "'}'");
  m.spans["op:" + op.name] = cur.span_from(start);
  return op;
}

DecisionNode parse_decision(Cursor& cur, Megamodel& m) {
  SourceSpan start = cur.peek().span;
  DecisionNode d;
  d.name = cur.ident("decision name");
  cur.expect(Tok::lbrace, "'{'");
  while (cur.at_word("when")) {
    cur.next();
    const Token& ct = cur.expect(Tok::string, "condition string");
    DecisionBranch b;
    b.condition = ct.text;
    Parsed<cond::ExprPtr> pc = cond::parse_condition(ct.text, ct.span);
    if (!pc) throw ParseFailure{pc.diagnostics.front()};
    b.expr = *pc;
    cur.expect(Tok::arrow, "'->'");
    b.target = parse_endpoint(cur);
    d.branches.push_back(std::move(b));
  }
  if (cur.at_word("else")) {
    cur.next();
    cur.expect(Tok::arrow, "'->'");
    DecisionBranch b;
    b.is_else = true;
    b.target = parse_endpoint(cur);
    d.branches.push_back(std::move(b));
  }
  cur.expect(Tok::rbrace, "'}' (branches are 'when \"cond\" -> target' followed by 'else -> target')");
  m.spans["decision:" + d.name] = cur.span_from(start);
  return d;
}

}  // namespace

Megamodel parse_megamodel_block(Cursor& cur, const std::string& file) {
  (void)file;
  Megamodel m;
  SourceSpan start = cur.expect_word("megamodel").span;
  const Token& name = cur.expect(Tok::string, "megamodel name");
  if (name.text.empty()) fail(name.span, "E-NAME-INVALID", "empty megamodel name");
  m.name = name.text;
  cur.expect(Tok::lbrace, "'{'");
  while (!cur.at(Tok::rbrace)) {
    const Token& kw = cur.expect(Tok::ident, "declaration");
    SourceSpan at = kw.span;
    const std::string word = kw.text;
    if (word == "model") {
      ModelSlot s;
      std::tie(s.name, s.display_name) = parse_named(cur, "model name");
      if (cur.accept(Tok::colon)) {
        const Token& st = cur.expect(Tok::ident, "model stereotype");
        auto ms = model_stereotype_from(st.text);
        if (!ms) fail(st.span, "E-SYNTAX", "unknown model stereotype '" + st.text + "'");
        s.stereotype = *ms;
      }
      if (cur.accept_word("megamodel-ref")) s.megamodel_ref = true;
      m.spans["model:" + s.name] = cur.span_from(at);
      m.slots.push_back(std::move(s));
    } else if (word == "initial" || word == "final" || word == "destruction") {
      ControlState s;
      std::tie(s.name, s.display_name) = parse_named(cur, "state name");
      s.initial = word == "initial";
      s.final = word != "initial";
      s.destruction = word == "destruction";
      m.spans["state:" + s.name] = cur.span_from(at);
      m.states.push_back(std::move(s));
    } else if (word == "operation" || word == "complex") {
      m.operations.push_back(parse_operation(cur, m, word == "complex"));
    } else if (word == "flow") {
      FlowEdge f;
      f.source = parse_endpoint(cur);
      cur.expect(Tok::arrow, "'->'");
      f.target = parse_endpoint(cur);
      m.flows.push_back(std::move(f));
      m.spans["flow:" + std::to_string(m.flows.size())] = cur.span_from(at);
    } else if (word == "decision") {
      m.decisions.push_back(parse_decision(cur, m));
    } else {
      fail(at, "E-SYNTAX", "unknown declaration '" + word + "'");
    }
  }
  cur.expect(Tok::rbrace, "'}'");
  m.spans["megamodel"] = cur.span_from(start);
  return m;
}

}  // namespace detail

Parsed<Megamodel> parse_fld(std::string_view text, const std::string& file) {
  Parsed<Megamodel> out;
  try {
    Cursor cur(detail::tokenize(text, file));
    Megamodel m = detail::parse_megamodel_block(cur, file);
    if (!cur.at_end()) fail(cur.peek().span, "E-SYNTAX", "only one megamodel per file");
    out.diagnostics = check_megamodel(m);
    for (Diagnostic& d : out.diagnostics)
      if (d.span.file.empty()) {
        d.span = m.spans["megamodel"];
        d.span.file = file;
      }
    if (!has_errors(out.diagnostics)) out.value = std::move(m);
  } catch (const ParseFailure& f) {
    out.diagnostics.push_back(f.diag);
  }
  return out;
}

namespace {

ArchitectureDecl parse_architecture_block(Cursor& cur) {
  ArchitectureDecl a;
  SourceSpan start = cur.expect_word("architecture").span;
  a.name = cur.string("architecture name");
  cur.expect(Tok::lbrace, "'{'");
  while (!cur.at(Tok::rbrace)) {
    const Token& kw = cur.expect(Tok::ident, "declaration");
    SourceSpan at = kw.span;
    const std::string word = kw.text;
    if (word == "layer") {
      const Token& num = cur.expect(Tok::number, "layer index");
      Layer l;
      auto [p, ec] = std::from_chars(num.text.data(), num.text.data() + num.text.size(), l.index);
      if (ec != std::errc() || p != num.text.data() + num.text.size())
        fail(num.span, "E-SYNTAX", "layer index must be an integer");
      l.name = cur.string("layer name");
      a.spans["layer:" + std::to_string(l.index)] = cur.span_from(at);
      cur.expect(Tok::lbrace, "'{'");
      while (!cur.at(Tok::rbrace)) {
        const Token& mk = cur.expect(Tok::ident, "'module' or 'software'");
        if (mk.text != "module" && mk.text != "software")
          fail(mk.span, "E-SYNTAX", "expected 'module' or 'software', got '" + mk.text + "'");
        SourceSpan mat = mk.span;
        ModuleDecl md;
        md.kind = mk.text == "module" ? ModuleKind::megamodel : ModuleKind::software;
        md.instance = cur.ident("module instance name");
        cur.expect(Tok::colon, "':'");
        md.source_ref = cur.string(md.kind == ModuleKind::megamodel ? "megamodel name" : "software key");
        md.layer = l.index;
        a.spans["module:" + md.instance] = cur.span_from(mat);
        a.modules.push_back(std::move(md));
      }
      cur.expect(Tok::rbrace, "'}'");
      a.layers.push_back(std::move(l));
    } else if (word == "use") {
      UseEdge u;
      u.module = cur.ident("module name");
      cur.expect(Tok::dot, "'.'");
      u.operation = cur.ident("operation name");
      cur.expect(Tok::arrow, "'->'");
      if (cur.at(Tok::string)) {
        u.target = cur.next().text;
        u.target_is_key = true;
      } else {
        u.target = cur.ident("target module");
      }
      a.spans["use:" + u.module + "." + u.operation] = cur.span_from(at);
      a.uses.push_back(std::move(u));
    } else if (word == "sense") {
      SenseEdge s;
      s.sensor = cur.ident("sensing module");
      cur.expect(Tok::back_arrow, "'<-'");
      s.sensed = cur.ident("sensed module");
      cur.expect(Tok::lbracket, "'['");
      const Token& mode = cur.expect(Tok::ident, "'r'");
      if (mode.text != "r") fail(mode.span, "E-EDGE-MODE", "sense edges read: mode must be 'r'");
      cur.expect(Tok::rbracket, "']'");
      if (cur.accept_word("trigger")) {
        const Token& t = cur.expect(Tok::string, "trigger string");
        s.trigger_text = t.text;
        Parsed<TriggerSpec> spec = parse_trigger(t.text, t.span);
        if (!spec) throw ParseFailure{spec.diagnostics.front()};
        s.trigger = *spec;
      }
      a.spans["sense:" + s.sensor + "<-" + s.sensed] = cur.span_from(at);
      a.senses.push_back(std::move(s));
    } else if (word == "effect") {
      EffectEdge e;
      e.source = cur.ident("effecting module");
      cur.expect(Tok::arrow, "'->'");
      e.target = cur.ident("effected module");
      cur.expect(Tok::lbracket, "'['");
      const Token& mode = cur.expect(Tok::ident, "'w' or 'a'");
      if (mode.text != "w" && mode.text != "a") fail(mode.span, "E-EDGE-MODE", "effect mode must be 'w' or 'a'");
      e.mode = mode.text == "w" ? EffectMode::write : EffectMode::annotate;
      cur.expect(Tok::rbracket, "']'");
      a.spans["effect:" + e.source + "->" + e.target] = cur.span_from(at);
      a.effects.push_back(std::move(e));
    } else if (word == "bind-model") {
      ModelBinding b;
      b.module = cur.ident("module name");
      cur.expect(Tok::dot, "'.'");
      b.slot = cur.ident("model name");
      cur.expect(Tok::arrow, "'->'");
      b.target = cur.ident("target module");
      a.spans["bind-model:" + b.module + "." + b.slot] = cur.span_from(at);
      a.model_bindings.push_back(std::move(b));
    } else {
      fail(at, "E-SYNTAX", "unknown declaration '" + word + "'");
    }
  }
  cur.expect(Tok::rbrace, "'}'");
  a.spans["architecture"] = cur.span_from(start);
  return a;
}

}  // namespace

Parsed<ArchitectureDecl> parse_ld(std::string_view text, const std::string& file) {
  Parsed<ArchitectureDecl> out;
  try {
    Cursor cur(detail::tokenize(text, file));
    ArchitectureDecl a = parse_architecture_block(cur);
    if (!cur.at_end()) fail(cur.peek().span, "E-SYNTAX", "only one architecture per file");
    out.diagnostics = check_architecture(a, ArchitectureContext{});
    for (Diagnostic& d : out.diagnostics)
      if (d.span.file.empty()) {
        d.span = a.spans["architecture"];
        d.span.file = file;
      }
    if (!has_errors(out.diagnostics)) out.value = std::move(a);
  } catch (const ParseFailure& f) {
    out.diagnostics.push_back(f.diag);
  }
  return out;
}

namespace {

std::string named(const std::string& name, const std::string& display) {
  return display.empty() ? name : quote(display) + " as " + name;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
  return out;
}

}  // namespace

std::string serialize_fld(const Megamodel& m) {
  std::string out = "megamodel " + quote(m.name) + " {\n";
  for (const ModelSlot& s : m.slots) {
    out += "  model " + named(s.name, s.display_name);
    if (s.stereotype != ModelStereotype::none) out += " : " + std::string(to_string(s.stereotype));
    if (s.megamodel_ref) out += " megamodel-ref";
    out += "\n";
  }
  if (!m.slots.empty()) out += "\n";
  for (const ControlState& s : m.states) {
    const char* kw = s.destruction ? "destruction" : s.initial ? "initial" : "final";
    out += "  " + std::string(kw) + " " + named(s.name, s.display_name) + "\n";
  }
  if (!m.states.empty()) out += "\n";
  for (const Operation& op : m.operations) {
    out += op.kind == OperationKind::complex ? "  complex " : "  operation ";
    out += named(op.name, op.display_name);
    if (op.activity != Activity::none) out += " <<" + std::string(to_string(op.activity)) + ">>";
    out += " {\n";
    if (!op.entries.empty()) out += "    entries { " + join(op.entries) + " }\n";
    out += op.exits.empty() ? "    exits { }\n" : "    exits { " + join(op.exits) + " }\n";
    for (const ModelUsage& u : op.usages) out += "    " + std::string(usage_keyword(u.kind)) + " " + u.slot + "\n";
    out += "  }\n";
  }
  if (!m.operations.empty()) out += "\n";
  for (const DecisionNode& d : m.decisions) {
    out += "  decision " + d.name + " {\n";
    for (const DecisionBranch& b : d.branches) {
      if (b.is_else) {
        out += "    else -> " + to_string(b.target) + "\n";
      } else {
        out += "    when " + quote(b.condition) + " -> " + to_string(b.target) + "\n";
      }
    }
    out += "  }\n";
  }
  if (!m.decisions.empty()) out += "\n";
  for (const FlowEdge& f : m.flows) out += "  flow " + to_string(f.source) + " -> " + to_string(f.target) + "\n";
  // Drop the blank separator before the closing brace.
  if (out.size() >= 2 && out[out.size() - 1] == '\n' && out[out.size() - 2] == '\n') out.pop_back();
  out += "}\n";
  return out;
}

std::string serialize_ld(const ArchitectureDecl& a) {
  std::string out = "architecture " + quote(a.name) + " {\n";
  for (const Layer& l : a.layers) {
    out += "  layer " + std::to_string(l.index) + " " + quote(l.name) + " {\n";
    for (const ModuleDecl& m : a.modules) {
      if (m.layer != l.index) continue;
      out += m.kind == ModuleKind::megamodel ? "    module " : "    software ";
      out += m.instance + " : " + quote(m.source_ref) + "\n";
    }
    out += "  }\n";
  }
  for (const SenseEdge& s : a.senses) {
    out += "  sense " + s.sensor + " <- " + s.sensed + " [r]";
    if (!s.trigger_text.empty()) out += " trigger " + quote(s.trigger_text);
    out += "\n";
  }
  for (const EffectEdge& e : a.effects)
    out += "  effect " + e.source + " -> " + e.target + (e.mode == EffectMode::write ? " [w]\n" : " [a]\n");
  for (const UseEdge& u : a.uses)
    out += "  use " + u.module + "." + u.operation + " -> " + (u.target_is_key ? quote(u.target) : u.target) + "\n";
  for (const ModelBinding& b : a.model_bindings)
    out += "  bind-model " + b.module + "." + b.slot + " -> " + b.target + "\n";
  out += "}\n";
  return out;
}

}  // namespace megart

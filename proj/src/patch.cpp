#include "megart/patch.hpp"

#include <algorithm>
#include <filesystem>

#include "dsl_internal.hpp"
#include "megart/dsl.hpp"
#include "megart/workspace.hpp"

namespace megart {

using detail::Cursor;
using detail::fail;
using detail::ParseFailure;
using detail::Tok;
using detail::Token;

namespace {

int parse_int(Cursor& cur, std::string_view what) {
  const Token& t = cur.expect(Tok::number, what);
  if (t.text.find_first_not_of("0123456789") != std::string::npos)
    fail(t.span, "E-SYNTAX", std::string(what) + " must be a non-negative integer");
  return std::stoi(t.text);
}

Megamodel load_megamodel(Cursor& cur, const std::string& file) {
  if (cur.at_word("megamodel")) {
    Megamodel m = detail::parse_megamodel_block(cur, file);
    Diagnostics d = check_megamodel(m);
    if (has_errors(d)) {
      Diagnostic first = d.front();
      if (first.span.file.empty()) first.span = m.spans["megamodel"];
      throw ParseFailure{first};
    }
    return m;
  }
  cur.expect_word("file");
  const Token& t = cur.expect(Tok::string, "file path");
  std::filesystem::path p = t.text;
  if (p.is_relative() && !file.empty()) p = std::filesystem::path(file).parent_path() / p;
  std::string text;
  try {
    text = read_file(p);
  } catch (const EngineError& e) {
    fail(t.span, "E-PATCH-RESOLVE", e.what());
  }
  Parsed<Megamodel> m = parse_fld(text, p.string());
  if (!m) throw ParseFailure{m.diagnostics.front()};
  return std::move(*m);
}

PatchStepBody parse_step(Cursor& cur, const std::string& word, const std::string& file) {
  if (word == "load-megamodel") return step::LoadMegamodel{load_megamodel(cur, file)};
  if (word == "unload-megamodel") return step::UnloadMegamodel{cur.string("megamodel name")};
  if (word == "add-layer") {
    step::AddLayer s;
    s.layer.index = parse_int(cur, "layer index");
    s.layer.name = cur.string("layer name");
    return s;
  }
  if (word == "remove-layer") return step::RemoveLayer{parse_int(cur, "layer index")};
  if (word == "add-module" || word == "add-software") {
    step::AddModule s;
    s.module.kind = word == "add-module" ? ModuleKind::megamodel : ModuleKind::software;
    s.module.layer = parse_int(cur, "layer index");
    s.module.instance = cur.ident("instance name");
    cur.expect(Tok::colon, "':'");
    s.module.source_ref = cur.string(word == "add-module" ? "megamodel name" : "software key");
    return s;
  }
  if (word == "remove-module") return step::RemoveModule{cur.ident("instance name")};
  if (word == "add-sense") {
    step::AddSense s;
    s.edge.sensor = cur.ident("sensing module");
    cur.expect(Tok::back_arrow, "'<-'");
    s.edge.sensed = cur.ident("sensed module");
    cur.expect(Tok::lbracket, "'['");
    const Token& mode = cur.expect(Tok::ident, "'r'");
    if (mode.text != "r") fail(mode.span, "E-EDGE-MODE", "sense edges read: mode must be 'r'");
    cur.expect(Tok::rbracket, "']'");
    if (cur.accept_word("trigger")) {
      const Token& t = cur.expect(Tok::string, "trigger string");
      Parsed<TriggerSpec> spec = parse_trigger(t.text, t.span);
      if (!spec) throw ParseFailure{spec.diagnostics.front()};
      s.edge.trigger_text = t.text;
      s.edge.trigger = *spec;
    }
    return s;
  }
  if (word == "add-effect") {
    step::AddEffect s;
    s.edge.source = cur.ident("effecting module");
    cur.expect(Tok::arrow, "'->'");
    s.edge.target = cur.ident("effected module");
    cur.expect(Tok::lbracket, "'['");
    const Token& mode = cur.expect(Tok::ident, "'w' or 'a'");
    if (mode.text != "w" && mode.text != "a") fail(mode.span, "E-EDGE-MODE", "effect mode must be 'w' or 'a'");
    s.edge.mode = mode.text == "w" ? EffectMode::write : EffectMode::annotate;
    cur.expect(Tok::rbracket, "']'");
    return s;
  }
  if (word == "remove-edge") {
    step::RemoveEdge s;
    const Token& kind = cur.expect(Tok::ident, "edge kind");
    if (kind.text == "sense") {
      s.kind = step::RemoveEdge::Kind::sense;
      s.a = cur.ident("sensing module");
      cur.expect(Tok::back_arrow, "'<-'");
      s.b = cur.ident("sensed module");
    } else if (kind.text == "effect") {
      s.kind = step::RemoveEdge::Kind::effect;
      s.a = cur.ident("effecting module");
      cur.expect(Tok::arrow, "'->'");
      s.b = cur.ident("effected module");
    } else if (kind.text == "use" || kind.text == "bind-model") {
      s.kind = kind.text == "use" ? step::RemoveEdge::Kind::use : step::RemoveEdge::Kind::bind_model;
      s.a = cur.ident("module name");
      cur.expect(Tok::dot, "'.'");
      s.b = cur.ident(kind.text == "use" ? "operation name" : "model name");
    } else {
      fail(kind.span, "E-SYNTAX", "unknown edge kind '" + kind.text + "'");
    }
    return s;
  }
  if (word == "bind-use") {
    step::BindUse s;
    s.edge.module = cur.ident("module name");
    cur.expect(Tok::dot, "'.'");
    s.edge.operation = cur.ident("operation name");
    cur.expect(Tok::arrow, "'->'");
    if (cur.at(Tok::string)) {
      s.edge.target = cur.next().text;
      s.edge.target_is_key = true;
    } else {
      s.edge.target = cur.ident("target module");
    }
    return s;
  }
  if (word == "bind-model") {
    step::BindModel s;
    s.binding.module = cur.ident("module name");
    cur.expect(Tok::dot, "'.'");
    s.binding.slot = cur.ident("model name");
    cur.expect(Tok::arrow, "'->'");
    s.binding.target = cur.ident("target module");
    return s;
  }
  if (word == "set-trigger") {
    step::SetTrigger s;
    s.sensor = cur.ident("sensing module");
    cur.expect(Tok::back_arrow, "'<-'");
    s.sensed = cur.ident("sensed module");
    const Token& t = cur.expect(Tok::string, "trigger string");
    Parsed<TriggerSpec> spec = parse_trigger(t.text, t.span);
    if (!spec) throw ParseFailure{spec.diagnostics.front()};
    s.text = t.text;
    return s;
  }
  throw ParseFailure{Diagnostic{Severity::error, "E-SYNTAX", "unknown patch step '" + word + "'", {}, {}}};
}

[[noreturn]] void unresolved(const PatchStep& s, const std::string& what) {
  throw EngineError("E-PATCH-RESOLVE", describe(s) + ": " + what);
}

[[noreturn]] void invalid(const PatchStep& s, const std::string& what) {
  throw EngineError("E-PATCH-INVALID", describe(s) + ": " + what);
}

template <typename Vec, typename Pred>
bool erase_if_any(Vec& v, Pred p) {
  auto it = std::remove_if(v.begin(), v.end(), p);
  bool any = it != v.end();
  v.erase(it, v.end());
  return any;
}

}  // namespace

Parsed<Patch> parse_patch(std::string_view text, const std::string& file) {
  Parsed<Patch> out;
  try {
    Cursor cur(detail::tokenize(text, file));
    cur.expect_word("patch");
    Patch p;
    p.name = cur.string("patch name");
    cur.expect(Tok::lbrace, "'{'");
    while (!cur.at(Tok::rbrace)) {
      const Token& w = cur.expect(Tok::ident, "patch step");
      SourceSpan at = w.span;
      std::string word = w.text;
      try {
        PatchStepBody body = parse_step(cur, word, file);
        p.steps.push_back(PatchStep{std::move(body), cur.span_from(at)});
      } catch (ParseFailure& f) {
        if (f.diag.span.file.empty() && f.diag.span.line_begin == 1 && f.diag.span.col_begin == 1) f.diag.span = at;
        throw;
      }
    }
    cur.expect(Tok::rbrace, "'}'");
    if (!cur.at_end()) fail(cur.peek().span, "E-SYNTAX", "only one patch per file");
    out.value = std::move(p);
  } catch (const ParseFailure& f) {
    out.diagnostics.push_back(f.diag);
  }
  return out;
}

Parsed<Patch> load_patch_file(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const EngineError& e) {
    Parsed<Patch> out;
    out.diagnostics.push_back(Diagnostic{Severity::error, "E-IO", e.what(), SourceSpan{path}, {}});
    return out;
  }
  return parse_patch(text, path);
}

std::string describe(const PatchStep& s) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, step::LoadMegamodel>) return "load-megamodel " + quote(x.megamodel.name);
        if constexpr (std::is_same_v<T, step::UnloadMegamodel>) return "unload-megamodel " + quote(x.name);
        if constexpr (std::is_same_v<T, step::AddLayer>)
          return "add-layer " + std::to_string(x.layer.index) + " " + quote(x.layer.name);
        if constexpr (std::is_same_v<T, step::RemoveLayer>) return "remove-layer " + std::to_string(x.index);
        if constexpr (std::is_same_v<T, step::AddModule>)
          return std::string(x.module.kind == ModuleKind::megamodel ? "add-module " : "add-software ") +
                 std::to_string(x.module.layer) + " " + x.module.instance + " : " + quote(x.module.source_ref);
        if constexpr (std::is_same_v<T, step::RemoveModule>) return "remove-module " + x.name;
        if constexpr (std::is_same_v<T, step::AddSense>) {
          std::string out = "add-sense " + x.edge.sensor + " <- " + x.edge.sensed + " [r]";
          if (!x.edge.trigger_text.empty()) out += " trigger " + quote(x.edge.trigger_text);
          return out;
        }
        if constexpr (std::is_same_v<T, step::AddEffect>)
          return "add-effect " + x.edge.source + " -> " + x.edge.target +
                 (x.edge.mode == EffectMode::write ? " [w]" : " [a]");
        if constexpr (std::is_same_v<T, step::RemoveEdge>) {
          switch (x.kind) {
            case step::RemoveEdge::Kind::sense: return "remove-edge sense " + x.a + " <- " + x.b;
            case step::RemoveEdge::Kind::effect: return "remove-edge effect " + x.a + " -> " + x.b;
            case step::RemoveEdge::Kind::use: return "remove-edge use " + x.a + "." + x.b;
            case step::RemoveEdge::Kind::bind_model: return "remove-edge bind-model " + x.a + "." + x.b;
          }
          return "remove-edge";
        }
        if constexpr (std::is_same_v<T, step::BindUse>)
          return "bind-use " + x.edge.module + "." + x.edge.operation + " -> " +
                 (x.edge.target_is_key ? quote(x.edge.target) : x.edge.target);
        if constexpr (std::is_same_v<T, step::BindModel>)
          return "bind-model " + x.binding.module + "." + x.binding.slot + " -> " + x.binding.target;
        if constexpr (std::is_same_v<T, step::SetTrigger>)
          return "set-trigger " + x.sensor + " <- " + x.sensed + " " + quote(x.text);
      },
      s.body);
}

void apply_steps(const Patch& patch, ArchitectureDecl& a, MegamodelRegistry& reg) {
  auto module = [&](const PatchStep& s, const std::string& name) -> const ModuleDecl& {
    const ModuleDecl* m = a.find_module(name);
    if (!m) unresolved(s, "no module '" + name + "'");
    return *m;
  };
  for (const PatchStep& s : patch.steps) {
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, step::LoadMegamodel>) {
            reg.insert_or_assign(x.megamodel.name, x.megamodel);
          } else if constexpr (std::is_same_v<T, step::UnloadMegamodel>) {
            if (!reg.erase(x.name)) unresolved(s, "no megamodel '" + x.name + "'");
          } else if constexpr (std::is_same_v<T, step::AddLayer>) {
            if (a.find_layer(x.layer.index)) invalid(s, "layer " + std::to_string(x.layer.index) + " exists");
            auto pos = std::find_if(a.layers.begin(), a.layers.end(),
                                    [&](const Layer& l) { return l.index > x.layer.index; });
            a.layers.insert(pos, x.layer);
          } else if constexpr (std::is_same_v<T, step::RemoveLayer>) {
            if (!a.find_layer(x.index)) unresolved(s, "no layer " + std::to_string(x.index));
            for (const ModuleDecl& m : a.modules)
              if (m.layer == x.index) invalid(s, "layer still holds module '" + m.instance + "'");
            erase_if_any(a.layers, [&](const Layer& l) { return l.index == x.index; });
          } else if constexpr (std::is_same_v<T, step::AddModule>) {
            if (!a.find_layer(x.module.layer)) unresolved(s, "no layer " + std::to_string(x.module.layer));
            if (x.module.kind == ModuleKind::megamodel && !reg.count(x.module.source_ref))
              unresolved(s, "no megamodel '" + x.module.source_ref + "'");
            if (a.find_module(x.module.instance)) invalid(s, "module '" + x.module.instance + "' exists");
            a.modules.push_back(x.module);
          } else if constexpr (std::is_same_v<T, step::RemoveModule>) {
            module(s, x.name);
            const std::string& n = x.name;
            erase_if_any(a.modules, [&](const ModuleDecl& m) { return m.instance == n; });
            erase_if_any(a.uses, [&](const UseEdge& u) { return u.module == n || (!u.target_is_key && u.target == n); });
            erase_if_any(a.senses, [&](const SenseEdge& e) { return e.sensor == n || e.sensed == n; });
            erase_if_any(a.effects, [&](const EffectEdge& e) { return e.source == n || e.target == n; });
            erase_if_any(a.model_bindings, [&](const ModelBinding& b) { return b.module == n || b.target == n; });
          } else if constexpr (std::is_same_v<T, step::AddSense>) {
            module(s, x.edge.sensor);
            module(s, x.edge.sensed);
            for (const SenseEdge& e : a.senses)
              if (e.sensor == x.edge.sensor && e.sensed == x.edge.sensed) invalid(s, "sense edge exists");
            a.senses.push_back(x.edge);
          } else if constexpr (std::is_same_v<T, step::AddEffect>) {
            module(s, x.edge.source);
            module(s, x.edge.target);
            for (const EffectEdge& e : a.effects)
              if (e.source == x.edge.source && e.target == x.edge.target) invalid(s, "effect edge exists");
            a.effects.push_back(x.edge);
          } else if constexpr (std::is_same_v<T, step::RemoveEdge>) {
            bool removed = false;
            switch (x.kind) {
              case step::RemoveEdge::Kind::sense:
                removed = erase_if_any(a.senses, [&](const SenseEdge& e) { return e.sensor == x.a && e.sensed == x.b; });
                break;
              case step::RemoveEdge::Kind::effect:
                removed = erase_if_any(a.effects, [&](const EffectEdge& e) { return e.source == x.a && e.target == x.b; });
                break;
              case step::RemoveEdge::Kind::use:
                removed = erase_if_any(a.uses, [&](const UseEdge& u) { return u.module == x.a && u.operation == x.b; });
                break;
              case step::RemoveEdge::Kind::bind_model:
                removed = erase_if_any(a.model_bindings,
                                       [&](const ModelBinding& b) { return b.module == x.a && b.slot == x.b; });
                break;
            }
            if (!removed) unresolved(s, "no such edge");
          } else if constexpr (std::is_same_v<T, step::BindUse>) {
            const ModuleDecl& m = module(s, x.edge.module);
            auto mm = reg.find(m.source_ref);
            if (m.kind != ModuleKind::megamodel || mm == reg.end() || !mm->second.find_operation(x.edge.operation))
              unresolved(s, "'" + x.edge.module + "' has no operation '" + x.edge.operation + "'");
            if (!x.edge.target_is_key) module(s, x.edge.target);
            if (UseEdge* u = a.find_use(x.edge.module, x.edge.operation)) {
              *u = x.edge;
            } else {
              a.uses.push_back(x.edge);
            }
          } else if constexpr (std::is_same_v<T, step::BindModel>) {
            module(s, x.binding.module);
            module(s, x.binding.target);
            auto it = std::find_if(a.model_bindings.begin(), a.model_bindings.end(), [&](const ModelBinding& b) {
              return b.module == x.binding.module && b.slot == x.binding.slot;
            });
            if (it != a.model_bindings.end()) {
              *it = x.binding;
            } else {
              a.model_bindings.push_back(x.binding);
            }
          } else if constexpr (std::is_same_v<T, step::SetTrigger>) {
            auto it = std::find_if(a.senses.begin(), a.senses.end(),
                                   [&](const SenseEdge& e) { return e.sensor == x.sensor && e.sensed == x.sensed; });
            if (it == a.senses.end()) unresolved(s, "no sense edge " + x.sensor + " <- " + x.sensed);
            Parsed<TriggerSpec> spec = parse_trigger(x.text);
            if (!spec) invalid(s, spec.diagnostics.front().message);
            it->trigger_text = x.text;
            it->trigger = *spec;
          }
        },
        s.body);
  }
}

PatchReport apply_patch(Engine& engine, const Patch& patch) {
  if (engine.busy()) throw EngineError("E-NOT-QUIESCENT", "patch '" + patch.name + "' requested during a run");
  ArchitectureDecl arch = engine.architecture();
  MegamodelRegistry reg = engine.megamodels();
  apply_steps(patch, arch, reg);
  PatchReport report;
  report.name = patch.name;
  report.steps = patch.steps.size();
  for (const PatchStep& s : patch.steps) report.applied.push_back(describe(s));
  if (patch.steps.empty()) {
    engine.record_mutation("patch", patch.name + " (empty)");
    return report;
  }
  engine.commit_structure(std::move(arch), std::move(reg), "patch " + patch.name);
  return report;
}

void submit_patch(Engine& engine, Patch patch, std::function<void(const PatchReport&, const std::string&)> done) {
  engine.post([patch = std::move(patch), done = std::move(done)](Engine& e) {
    PatchReport report;
    std::string error;
    try {
      report = apply_patch(e, patch);
    } catch (const EngineError& x) {
      error = x.what();
    }
    if (done) done(report, error);
  });
}

}  // namespace megart

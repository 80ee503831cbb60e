#include "megart/metamodel.hpp"

#include <algorithm>
#include <functional>
#include <tuple>

namespace megart {

bool has_errors(const Diagnostics& diags) {
  return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) { return d.severity == Severity::error; });
}

bool has_code(const Diagnostics& diags, std::string_view code) {
  return std::any_of(diags.begin(), diags.end(), [&](const Diagnostic& d) { return d.code == code; });
}

std::string format_diagnostic(const Diagnostic& d) {
  std::string out;
  if (!d.span.file.empty()) out += d.span.file + ":";
  out += std::to_string(d.span.line_begin) + ":" + std::to_string(d.span.col_begin) + ": ";
  out += d.severity == Severity::error ? "error " : "warning ";
  out += d.code + ": " + d.message;
  if (!d.path.empty()) out += " [" + d.path + "]";
  return out;
}

std::string_view to_string(Activity a) {
  switch (a) {
    case Activity::Monitor: return "Monitor";
    case Activity::Analyze: return "Analyze";
    case Activity::Plan: return "Plan";
    case Activity::Execute: return "Execute";
    case Activity::none: break;
  }
  return "";
}

std::optional<Activity> activity_from(std::string_view s) {
  for (Activity a : {Activity::Monitor, Activity::Analyze, Activity::Plan, Activity::Execute})
    if (to_string(a) == s) return a;
  return std::nullopt;
}

std::string_view to_string(UsageKind k) {
  switch (k) {
    case UsageKind::create: return "create";
    case UsageKind::destroy: return "destroy";
    case UsageKind::write: return "write";
    case UsageKind::read: return "read";
    case UsageKind::annotate: return "annotate";
  }
  return "";
}

std::string_view usage_keyword(UsageKind k) {
  switch (k) {
    case UsageKind::create: return "creates";
    case UsageKind::destroy: return "destroys";
    case UsageKind::write: return "writes";
    case UsageKind::read: return "reads";
    case UsageKind::annotate: return "annotates";
  }
  return "";
}

std::optional<UsageKind> usage_from_keyword(std::string_view s) {
  for (UsageKind k : {UsageKind::create, UsageKind::destroy, UsageKind::write, UsageKind::read, UsageKind::annotate})
    if (usage_keyword(k) == s) return k;
  return std::nullopt;
}

std::string_view to_string(ModelStereotype s) {
  switch (s) {
    case ModelStereotype::MonitoringModel: return "MonitoringModel";
    case ModelStereotype::ExecutionModel: return "ExecutionModel";
    case ModelStereotype::CausalConnectionModel: return "CausalConnectionModel";
    case ModelStereotype::ReflectionModel: return "ReflectionModel";
    case ModelStereotype::EvaluationModel: return "EvaluationModel";
    case ModelStereotype::ChangeModel: return "ChangeModel";
    case ModelStereotype::AdaptationModel: return "AdaptationModel";
    case ModelStereotype::none: break;
  }
  return "";
}

std::optional<ModelStereotype> model_stereotype_from(std::string_view s) {
  for (ModelStereotype m :
       {ModelStereotype::MonitoringModel, ModelStereotype::ExecutionModel, ModelStereotype::CausalConnectionModel,
        ModelStereotype::ReflectionModel, ModelStereotype::EvaluationModel, ModelStereotype::ChangeModel,
        ModelStereotype::AdaptationModel})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

std::string to_string(const Endpoint& e) {
  return e.compartment.empty() ? e.node : e.node + "." + e.compartment;
}

bool Operation::has_exit(std::string_view e) const {
  return std::find(exits.begin(), exits.end(), e) != exits.end();
}

const Operation* Megamodel::find_operation(std::string_view n) const {
  for (const Operation& o : operations)
    if (o.name == n) return &o;
  return nullptr;
}

Operation* Megamodel::find_operation(std::string_view n) {
  return const_cast<Operation*>(std::as_const(*this).find_operation(n));
}

const ControlState* Megamodel::find_state(std::string_view n) const {
  for (const ControlState& s : states)
    if (s.name == n) return &s;
  return nullptr;
}

const DecisionNode* Megamodel::find_decision(std::string_view n) const {
  for (const DecisionNode& d : decisions)
    if (d.name == n) return &d;
  return nullptr;
}

DecisionNode* Megamodel::find_decision(std::string_view n) {
  return const_cast<DecisionNode*>(std::as_const(*this).find_decision(n));
}

const ModelSlot* Megamodel::find_slot(std::string_view n) const {
  for (const ModelSlot& s : slots)
    if (s.name == n) return &s;
  return nullptr;
}

const Endpoint* Megamodel::flow_from(const Endpoint& source) const {
  for (const FlowEdge& f : flows)
    if (f.source == source) return &f.target;
  return nullptr;
}

Signature signature_of(const Megamodel& m) {
  Signature sig;
  for (const ControlState& s : m.states) {
    if (s.initial) sig.entry_states.insert(s.name);
    if (s.final) sig.exit_states.insert(s.name);
  }
  sig.single_entry = sig.entry_states.size() == 1;
  sig.single_exit = sig.exit_states.size() == 1;
  return sig;
}

std::string mape_label(const Megamodel& m) {
  static constexpr Activity order[] = {Activity::Monitor, Activity::Analyze, Activity::Plan, Activity::Execute};
  bool present[4] = {};
  for (const Operation& op : m.operations)
    for (int i = 0; i < 4; ++i)
      if (op.activity == order[i]) present[i] = true;
  std::string out;
  bool gap = false;
  for (int i = 0; i < 4; ++i) {
    if (!present[i]) {
      gap = !out.empty();
      continue;
    }
    if (gap) out += "..";
    gap = false;
    out += to_string(order[i]).front();
  }
  return out;
}

namespace {

class Checker {
 public:
  Checker(const SpanTable& spans, Diagnostics& out) : spans_(spans), out_(out) {}

  void error(std::string code, std::string message, const std::string& path) {
    SourceSpan sp;
    if (auto it = spans_.find(path); it != spans_.end()) sp = it->second;
    out_.push_back(Diagnostic{Severity::error, std::move(code), std::move(message), sp, path});
  }

 private:
  const SpanTable& spans_;
  Diagnostics& out_;
};

bool ident_ok(std::string_view s) {
  if (s.empty()) return false;
  auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  if (!alpha(s.front())) return false;
  return std::all_of(s.begin(), s.end(), [&](char c) { return alpha(c) || (c >= '0' && c <= '9') || c == '-'; });
}

}  // namespace

Diagnostics check_megamodel(const Megamodel& m) {
  Diagnostics out;
  Checker ck(m.spans, out);

  if (m.name.empty()) ck.error("E-NAME-INVALID", "megamodel name is empty", "megamodel");

  // Operations, states, and decisions share one namespace so that flow
  // endpoints resolve unambiguously; slots have their own.
  std::set<std::string> nodes;
  auto claim = [&](const std::string& name, const std::string& path) {
    if (!ident_ok(name)) ck.error("E-NAME-INVALID", "invalid identifier '" + name + "'", path);
    if (!nodes.insert(name).second) ck.error("E-NAME-DUP", "duplicate name '" + name + "'", path);
  };

  std::set<std::string> slot_names;
  for (const ModelSlot& s : m.slots) {
    std::string path = "model:" + s.name;
    if (!ident_ok(s.name)) ck.error("E-NAME-INVALID", "invalid identifier '" + s.name + "'", path);
    if (!slot_names.insert(s.name).second) ck.error("E-NAME-DUP", "duplicate model '" + s.name + "'", path);
    if (s.megamodel_ref && s.stereotype != ModelStereotype::none && s.stereotype != ModelStereotype::ReflectionModel)
      ck.error("E-SLOT-REF", "megamodel-ref model '" + s.name + "' must be a ReflectionModel", path);
  }

  bool any_initial = false;
  bool any_final = false;
  for (const ControlState& s : m.states) {
    std::string path = "state:" + s.name;
    claim(s.name, path);
    any_initial |= s.initial;
    any_final |= s.final;
    if (s.destruction && !s.final)
      ck.error("E-STATE-DESTR", "destruction state '" + s.name + "' is not final", path);
    if (s.initial == s.final)
      ck.error("E-STATE-KIND", "state '" + s.name + "' must be either initial or final", path);
  }
  if (!any_initial) ck.error("E-NO-INITIAL", "megamodel has no initial state", "megamodel");
  if (!any_final) ck.error("E-NO-FINAL", "megamodel has no final state", "megamodel");

  for (const Operation& op : m.operations) {
    std::string path = "op:" + op.name;
    claim(op.name, path);
    if (op.exits.empty()) ck.error("E-OP-EXITS", "operation '" + op.name + "' has no exit compartment", path);
    std::set<std::string> seen;
    for (const std::string& e : op.exits) {
      if (!ident_ok(e)) ck.error("E-NAME-INVALID", "invalid exit name '" + e + "'", path);
      if (!seen.insert(e).second) ck.error("E-OP-EXITS", "duplicate exit '" + e + "' on '" + op.name + "'", path);
    }
    if (op.kind == OperationKind::basic && !op.entries.empty())
      ck.error("E-OP-ENTRIES", "basic operation '" + op.name + "' cannot declare entries", path);
    seen.clear();
    for (const std::string& e : op.entries)
      if (!seen.insert(e).second) ck.error("E-OP-ENTRIES", "duplicate entry '" + e + "' on '" + op.name + "'", path);
    for (const ModelUsage& u : op.usages)
      if (!slot_names.count(u.slot))
        ck.error("E-USAGE-SLOT", "operation '" + op.name + "' uses undeclared model '" + u.slot + "'", path);
  }

  for (const DecisionNode& d : m.decisions) claim(d.name, "decision:" + d.name);

  // A flow or branch target must be a final state, a basic operation, a
  // complex operation entry (implicit when it has at most one), or a decision.
  auto check_target = [&](const Endpoint& t, const std::string& path) {
    if (const ControlState* s = m.find_state(t.node)) {
      if (!s->final || !t.compartment.empty())
        ck.error("E-FLOW-ENDPOINT", "'" + to_string(t) + "' is not a valid flow target", path);
      return;
    }
    if (const Operation* op = m.find_operation(t.node)) {
      if (op->kind == OperationKind::basic) {
        if (!t.compartment.empty())
          ck.error("E-FLOW-ENDPOINT", "basic operation '" + op->name + "' has no entry compartments", path);
      } else if (t.compartment.empty()) {
        if (op->entries.size() > 1)
          ck.error("E-FLOW-ENDPOINT", "flow into '" + op->name + "' must name an entry compartment", path);
      } else if (std::find(op->entries.begin(), op->entries.end(), t.compartment) == op->entries.end()) {
        ck.error("E-FLOW-ENDPOINT", "'" + op->name + "' has no entry '" + t.compartment + "'", path);
      }
      return;
    }
    if (m.find_decision(t.node) && t.compartment.empty()) return;
    ck.error("E-FLOW-ENDPOINT", "unknown flow target '" + to_string(t) + "'", path);
  };

  std::map<Endpoint, int> outgoing;
  for (std::size_t i = 0; i < m.flows.size(); ++i) {
    const FlowEdge& f = m.flows[i];
    std::string path = "flow:" + std::to_string(i + 1);
    const Endpoint& s = f.source;
    bool source_ok = false;
    if (const ControlState* st = m.find_state(s.node)) {
      source_ok = st->initial && s.compartment.empty();
    } else if (const Operation* op = m.find_operation(s.node)) {
      source_ok = op->has_exit(s.compartment);
    }
    if (!source_ok) ck.error("E-FLOW-ENDPOINT", "'" + to_string(s) + "' is not a valid flow source", path);
    ++outgoing[s];
    check_target(f.target, path);
  }

  for (const ControlState& s : m.states) {
    if (!s.initial) continue;
    int n = outgoing[Endpoint{s.name, {}}];
    if (n != 1)
      ck.error("E-INITIAL-FLOW",
               "initial state '" + s.name + "' needs exactly one outgoing flow, has " + std::to_string(n),
               "state:" + s.name);
  }
  for (const Operation& op : m.operations) {
    for (const std::string& e : op.exits) {
      int n = outgoing[Endpoint{op.name, e}];
      if (n != 1)
        ck.error("E-EXIT-FLOW",
                 "exit '" + op.name + "." + e + "' needs exactly one outgoing flow, has " + std::to_string(n),
                 "op:" + op.name);
    }
  }

  for (const DecisionNode& d : m.decisions) {
    std::string path = "decision:" + d.name;
    int elses = 0;
    for (std::size_t i = 0; i < d.branches.size(); ++i) {
      const DecisionBranch& b = d.branches[i];
      if (b.is_else) {
        ++elses;
        if (i + 1 != d.branches.size())
          ck.error("E-DEC-ELSE", "else branch of '" + d.name + "' must be last", path);
      } else if (!b.expr) {
        ck.error("E-COND-SYNTAX", "branch " + std::to_string(i + 1) + " of '" + d.name + "' has no condition", path);
      } else {
        for (const cond::Atom* a : cond::atoms_of(*b.expr)) {
          if (a->kind == cond::AtomKind::run_count) continue;
          const Operation* op = m.find_operation(a->op);
          if (!op) {
            ck.error("E-COND-REF", "condition references unknown operation '" + a->op + "'", path);
          } else if (!a->exit.empty() && !op->has_exit(a->exit)) {
            ck.error("E-COND-REF", "condition references unknown exit '" + a->op + "." + a->exit + "'", path);
          }
        }
      }
      check_target(b.target, path);
    }
    if (elses != 1)
      ck.error("E-DEC-ELSE", "decision '" + d.name + "' needs exactly one else branch", path);
  }
  return out;
}

// ---------------------------------------------------------------------------

const ModuleDecl* ArchitectureDecl::find_module(std::string_view instance) const {
  for (const ModuleDecl& m : modules)
    if (m.instance == instance) return &m;
  return nullptr;
}

const Layer* ArchitectureDecl::find_layer(int index) const {
  for (const Layer& l : layers)
    if (l.index == index) return &l;
  return nullptr;
}

const UseEdge* ArchitectureDecl::find_use(std::string_view module, std::string_view op) const {
  for (const UseEdge& u : uses)
    if (u.module == module && u.operation == op) return &u;
  return nullptr;
}

UseEdge* ArchitectureDecl::find_use(std::string_view module, std::string_view op) {
  return const_cast<UseEdge*>(std::as_const(*this).find_use(module, op));
}

namespace {

template <typename T, typename Key>
std::vector<Key> sorted_keys(const std::vector<T>& v, std::function<Key(const T&)> key) {
  std::vector<Key> out;
  for (const T& x : v) out.push_back(key(x));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

bool equivalent(const ArchitectureDecl& a, const ArchitectureDecl& b) {
  using S = std::string;
  auto layers = [](const ArchitectureDecl& x) {
    return sorted_keys<Layer, std::tuple<int, S>>(x.layers, [](const Layer& l) { return std::tuple(l.index, l.name); });
  };
  auto modules = [](const ArchitectureDecl& x) {
    return sorted_keys<ModuleDecl, std::tuple<S, int, S, int>>(x.modules, [](const ModuleDecl& m) {
      return std::tuple(m.instance, static_cast<int>(m.kind), m.source_ref, m.layer);
    });
  };
  auto uses = [](const ArchitectureDecl& x) {
    return sorted_keys<UseEdge, std::tuple<S, S, S, bool>>(
        x.uses, [](const UseEdge& u) { return std::tuple(u.module, u.operation, u.target, u.target_is_key); });
  };
  auto senses = [](const ArchitectureDecl& x) {
    return sorted_keys<SenseEdge, std::tuple<S, S, S>>(x.senses, [](const SenseEdge& s) {
      return std::tuple(s.sensor, s.sensed, s.trigger ? to_string(*s.trigger) : s.trigger_text);
    });
  };
  auto effects = [](const ArchitectureDecl& x) {
    return sorted_keys<EffectEdge, std::tuple<S, S, int>>(
        x.effects, [](const EffectEdge& e) { return std::tuple(e.source, e.target, static_cast<int>(e.mode)); });
  };
  auto binds = [](const ArchitectureDecl& x) {
    return sorted_keys<ModelBinding, std::tuple<S, S, S>>(
        x.model_bindings, [](const ModelBinding& m) { return std::tuple(m.module, m.slot, m.target); });
  };
  return a.name == b.name && layers(a) == layers(b) && modules(a) == modules(b) && uses(a) == uses(b) &&
         senses(a) == senses(b) && effects(a) == effects(b) && binds(a) == binds(b);
}

namespace {

const Megamodel* megamodel_of(const ArchitectureDecl& arch, const ArchitectureContext& ctx, std::string_view inst) {
  if (!ctx.megamodels) return nullptr;
  const ModuleDecl* m = arch.find_module(inst);
  if (!m || m->kind != ModuleKind::megamodel) return nullptr;
  auto it = ctx.megamodels->find(m->source_ref);
  return it == ctx.megamodels->end() ? nullptr : &it->second;
}

std::string use_path(const UseEdge& u) { return "use:" + u.module + "." + u.operation; }

void check_use(const ArchitectureDecl& arch, const UseEdge& u, const ArchitectureContext& ctx, Checker& ck) {
  std::string path = use_path(u);
  const ModuleDecl* src = arch.find_module(u.module);
  if (!src) {
    ck.error("E-EDGE-REF", "use edge from unknown module '" + u.module + "'", path);
    return;
  }
  if (src->kind != ModuleKind::megamodel) {
    ck.error("E-USE-OP", "use edge source '" + u.module + "' is not a megamodel module", path);
    return;
  }
  const ModuleDecl* dst = u.target_is_key ? nullptr : arch.find_module(u.target);
  if (!u.target_is_key && !dst) {
    ck.error("E-EDGE-REF", "use edge to unknown module '" + u.target + "'", path);
    return;
  }
  if (!ctx.megamodels) return;
  const Megamodel* mm = megamodel_of(arch, ctx, u.module);
  if (!mm) return;  // reported as E-MODULE-REF
  const Operation* op = mm->find_operation(u.operation);
  if (!op) {
    ck.error("E-USE-OP", "'" + mm->name + "' has no operation '" + u.operation + "'", path);
    return;
  }
  bool target_is_software = u.target_is_key || dst->kind == ModuleKind::software;
  if (op->kind == OperationKind::basic) {
    if (!target_is_software) {
      ck.error("E-USE-KIND", "basic operation '" + u.operation + "' must bind a software module", path);
      return;
    }
    std::string key = u.target_is_key ? u.target : dst->source_ref;
    if (ctx.software_keys && !ctx.software_keys->count(key))
      ck.error("E-BIND-UNKNOWN", "no software module registered as '" + key + "'", path);
    return;
  }
  if (target_is_software) {
    ck.error("E-USE-KIND", "complex operation '" + u.operation + "' must bind a megamodel module", path);
    return;
  }
  const Megamodel* callee = megamodel_of(arch, ctx, u.target);
  if (!callee) return;
  Signature sig = signature_of(*callee);
  std::set<std::string> exits(op->exits.begin(), op->exits.end());
  bool entries_ok;
  if (op->entries.empty()) {
    entries_ok = sig.single_entry;  // implicit entry requires a unique initial state
  } else {
    entries_ok = std::set<std::string>(op->entries.begin(), op->entries.end()) == sig.entry_states;
  }
  if (!entries_ok || exits != sig.exit_states)
    ck.error("E-SIG-MISMATCH",
             "operation '" + u.module + "." + u.operation + "' does not match the signature of '" + callee->name + "'",
             path);
  for (const ModelUsage& usage : op->usages)
    if (!callee->find_slot(usage.slot))
      ck.error("E-ALIAS", "'" + callee->name + "' has no model '" + usage.slot + "' to receive the parameter", path);
}

}  // namespace

Diagnostics check_use_edge(const ArchitectureDecl& arch, const UseEdge& edge, const ArchitectureContext& ctx) {
  Diagnostics out;
  Checker ck(arch.spans, out);
  check_use(arch, edge, ctx, ck);
  return out;
}

Diagnostics check_architecture(const ArchitectureDecl& arch, const ArchitectureContext& ctx) {
  Diagnostics out;
  Checker ck(arch.spans, out);

  std::set<int> layer_ids;
  for (const Layer& l : arch.layers) {
    std::string path = "layer:" + std::to_string(l.index);
    if (l.index < 0) ck.error("E-LAYER-INDEX", "layer index must be non-negative", path);
    if (!layer_ids.insert(l.index).second) ck.error("E-LAYER-DUP", "duplicate layer " + std::to_string(l.index), path);
  }

  std::set<std::string> names;
  for (const ModuleDecl& m : arch.modules) {
    std::string path = "module:" + m.instance;
    if (!ident_ok(m.instance)) ck.error("E-NAME-INVALID", "invalid module name '" + m.instance + "'", path);
    if (!names.insert(m.instance).second) ck.error("E-MODULE-DUP", "duplicate module '" + m.instance + "'", path);
    if (!layer_ids.count(m.layer))
      ck.error("E-MODULE-LAYER", "module '" + m.instance + "' is in undeclared layer " + std::to_string(m.layer), path);
    if (m.kind == ModuleKind::megamodel && ctx.megamodels && !ctx.megamodels->count(m.source_ref))
      ck.error("E-MODULE-REF", "unknown megamodel '" + m.source_ref + "'", path);
    if (m.kind == ModuleKind::software && ctx.software_keys && !ctx.software_keys->count(m.source_ref))
      ck.error("E-BIND-UNKNOWN", "no software module registered as '" + m.source_ref + "'", path);
  }

  auto layer_of = [&](const std::string& inst) -> std::optional<int> {
    const ModuleDecl* m = arch.find_module(inst);
    return m ? std::optional<int>(m->layer) : std::nullopt;
  };

  // Uses: one per operation, every operation bound, no invocation cycles.
  std::map<std::pair<std::string, std::string>, int> use_count;
  for (const UseEdge& u : arch.uses) {
    check_use(arch, u, ctx, ck);
    if (++use_count[{u.module, u.operation}] == 2)
      ck.error("E-USE-DUP", "operation '" + u.module + "." + u.operation + "' is bound twice", use_path(u));
  }
  if (ctx.megamodels) {
    for (const ModuleDecl& m : arch.modules) {
      const Megamodel* mm = megamodel_of(arch, ctx, m.instance);
      if (!mm) continue;
      for (const Operation& op : mm->operations)
        if (!use_count.count({m.instance, op.name}))
          ck.error("E-BIND-MISSING", "operation '" + m.instance + "." + op.name + "' is not bound", "module:" + m.instance);
    }
  }
  {
    std::map<std::string, std::vector<std::string>> calls;
    for (const UseEdge& u : arch.uses) {
      const ModuleDecl* dst = u.target_is_key ? nullptr : arch.find_module(u.target);
      if (dst && dst->kind == ModuleKind::megamodel) calls[u.module].push_back(u.target);
    }
    std::map<std::string, int> color;  // 0 white, 1 grey, 2 black
    std::set<std::string> reported;
    std::function<void(const std::string&)> dfs = [&](const std::string& n) {
      color[n] = 1;
      for (const std::string& next : calls[n]) {
        if (color[next] == 1) {
          if (reported.insert(next).second)
            ck.error("E-USE-CYCLE", "use edges form a cycle through '" + next + "'", "module:" + next);
        } else if (color[next] == 0) {
          dfs(next);
        }
      }
      color[n] = 2;
    };
    for (const ModuleDecl& m : arch.modules)
      if (color[m.instance] == 0) dfs(m.instance);
  }

  for (std::size_t i = 0; i < arch.senses.size(); ++i) {
    const SenseEdge& s = arch.senses[i];
    std::string path = "sense:" + s.sensor + "<-" + s.sensed;
    const ModuleDecl* sensor = arch.find_module(s.sensor);
    const ModuleDecl* sensed = arch.find_module(s.sensed);
    if (!sensor || !sensed) {
      ck.error("E-EDGE-REF", "sense edge references unknown module", path);
      continue;
    }
    if (sensed->layer > sensor->layer)
      ck.error("E-LAYER-DIR", "'" + s.sensor + "' senses a module in a higher layer", path);
    if (s.trigger_text.empty()) continue;
    if (sensor->kind != ModuleKind::megamodel) {
      ck.error("E-TRIG-SENSOR", "trigger on a sense edge of software module '" + s.sensor + "'", path);
      continue;
    }
    std::optional<TriggerSpec> spec = s.trigger;
    if (!spec) {
      Parsed<TriggerSpec> p = parse_trigger(s.trigger_text);
      for (Diagnostic d : p.diagnostics) {
        d.path = path;
        if (auto it = arch.spans.find(path); it != arch.spans.end()) d.span = it->second;
        out.push_back(std::move(d));
      }
      spec = p.value;
    }
    if (!spec) continue;
    if (const Megamodel* mm = megamodel_of(arch, ctx, s.sensor)) {
      if (!signature_of(*mm).entry_states.count(spec->initial_state))
        ck.error("E-TRIG-STATE", "'" + spec->initial_state + "' is not an initial state of '" + mm->name + "'", path);
    }
    for (const EventPattern& p : spec->events) {
      if (p.is_interception()) {
        if (sensed->kind != ModuleKind::megamodel)
          ck.error("E-TRIG-EVENT", "interception pattern on software module '" + s.sensed + "'", path);
        continue;
      }
      if (ctx.event_types && !ctx.event_types->contains(p.name))
        ck.error("E-TRIG-EVENT", "undeclared event type '" + p.name + "'", path);
    }
  }

  for (const EffectEdge& e : arch.effects) {
    std::string path = "effect:" + e.source + "->" + e.target;
    auto ls = layer_of(e.source);
    auto lt = layer_of(e.target);
    if (!ls || !lt) {
      ck.error("E-EDGE-REF", "effect edge references unknown module", path);
      continue;
    }
    if (*lt > *ls) ck.error("E-LAYER-DIR", "'" + e.source + "' effects a module in a higher layer", path);
  }

  std::set<std::pair<std::string, std::string>> bound_refs;
  for (const ModelBinding& b : arch.model_bindings) {
    std::string path = "bind-model:" + b.module + "." + b.slot;
    const ModuleDecl* src = arch.find_module(b.module);
    const ModuleDecl* dst = arch.find_module(b.target);
    if (!src || !dst) {
      ck.error("E-EDGE-REF", "model binding references unknown module", path);
      continue;
    }
    if (dst->kind != ModuleKind::megamodel)
      ck.error("E-BIND-MODEL", "model binding target '" + b.target + "' is not a megamodel module", path);
    if (!bound_refs.insert({b.module, b.slot}).second)
      ck.error("E-BIND-MODEL", "model '" + b.module + "." + b.slot + "' is bound twice", path);
    if (const Megamodel* mm = megamodel_of(arch, ctx, b.module)) {
      const ModelSlot* slot = mm->find_slot(b.slot);
      if (!slot || !slot->megamodel_ref)
        ck.error("E-BIND-MODEL", "'" + b.slot + "' is not a megamodel-ref model of '" + mm->name + "'", path);
    }
  }
  if (ctx.megamodels) {
    for (const ModuleDecl& m : arch.modules) {
      const Megamodel* mm = megamodel_of(arch, ctx, m.instance);
      if (!mm) continue;
      for (const ModelSlot& s : mm->slots)
        if (s.megamodel_ref && !bound_refs.count({m.instance, s.name}))
          ck.error("E-BIND-MODEL", "megamodel-ref model '" + m.instance + "." + s.name + "' is not bound",
                   "module:" + m.instance);
    }
  }
  return out;
}

}  // namespace megart

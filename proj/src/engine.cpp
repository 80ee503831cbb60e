#include "megart/engine.hpp"

#include <algorithm>
#include <cstdio>

#include "megart/dsl.hpp"

namespace megart {

RuntimeModel& ModelStore::put(const std::string& id, ModelStereotype kind, Json body) {
  auto [it, inserted] = models_.try_emplace(id);
  RuntimeModel& m = it->second;
  m.id = id;
  m.kind = kind;
  m.body = std::move(body);
  m.revision = inserted ? 0 : m.revision + 1;
  return m;
}

RuntimeModel* ModelStore::find(std::string_view id) {
  auto it = models_.find(id);
  return it == models_.end() ? nullptr : &it->second;
}

const RuntimeModel* ModelStore::find(std::string_view id) const {
  auto it = models_.find(id);
  return it == models_.end() ? nullptr : &it->second;
}

bool ModelStore::remove(std::string_view id) {
  auto it = models_.find(id);
  if (it == models_.end()) return false;
  models_.erase(it);
  return true;
}

void ModelStore::touch(std::string_view id) {
  if (RuntimeModel* m = find(id)) ++m->revision;
}

std::vector<std::string> ModelStore::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : models_) out.push_back(id);
  return out;
}

std::string_view to_string(TraceKind k) {
  switch (k) {
    case TraceKind::run_start: return "runStart";
    case TraceKind::enter_state: return "enterState";
    case TraceKind::op_start: return "opStart";
    case TraceKind::op_end: return "opEnd";
    case TraceKind::decision: return "decision";
    case TraceKind::run_end: return "runEnd";
    case TraceKind::intercept: return "intercept";
    case TraceKind::error: return "error";
  }
  return "";
}

std::string format_trace(const TraceEntry& e) {
  char ts[32];
  std::snprintf(ts, sizeof ts, "%.6f", to_seconds(e.time));
  std::string out = std::string(ts) + " " + std::string(static_cast<std::size_t>(e.depth) * 2, ' ') + e.instance +
                    " " + std::string(to_string(e.kind)) + " " + e.name;
  if (!e.detail.empty()) out += " " + e.detail;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

bool declares_usage(const Operation& op, std::string_view slot) {
  return std::any_of(op.usages.begin(), op.usages.end(), [&](const ModelUsage& u) { return u.slot == slot; });
}

}  // namespace

bool OperationContext::has_model(std::string_view slot) const {
  if (!declares_usage(op_, slot)) return false;
  const ModuleInstance* inst = engine_.instance(instance_);
  if (!inst) return false;
  auto it = inst->model_ids.find(std::string(slot));
  return it != inst->model_ids.end() && engine_.models().find(it->second) != nullptr;
}

RuntimeModel& OperationContext::model(std::string_view slot) {
  if (!declares_usage(op_, slot))
    throw EngineError("E-MODEL-MISSING", "operation '" + op_.name + "' does not use model '" + std::string(slot) + "'");
  ModuleInstance* inst = engine_.instance(instance_);
  auto it = inst ? inst->model_ids.find(std::string(slot)) : decltype(inst->model_ids.end()){};
  RuntimeModel* m = inst && it != inst->model_ids.end() ? engine_.models().find(it->second) : nullptr;
  if (!m)
    throw EngineError("E-MODEL-MISSING", "model '" + std::string(slot) + "' of '" + instance_ + "' is not bound");
  return *m;
}

std::string OperationContext::bound_instance(std::string_view slot) const {
  if (!declares_usage(op_, slot))
    throw EngineError("E-MODEL-MISSING", "operation '" + op_.name + "' does not use model '" + std::string(slot) + "'");
  for (const ModelBinding& b : engine_.architecture().model_bindings)
    if (b.module == instance_ && b.slot == slot) return b.target;
  throw EngineError("E-MODEL-MISSING", "model '" + std::string(slot) + "' of '" + instance_ + "' is not bound");
}

Ticks OperationContext::now() const { return engine_.now(); }
void OperationContext::spend(Ticks d) { engine_.clock().sleep_for(d); }
void OperationContext::emit(Event e) {
  if (e.source.empty()) e.source = instance_;
  if (e.timestamp == 0) e.timestamp = engine_.now();
  engine_.post_event(std::move(e));
}

// ---------------------------------------------------------------------------

Engine::Engine(Clock& clock, const SoftwareRegistry& software) : clock_(clock), software_(software) {}
Engine::~Engine() = default;

void Engine::add_megamodel(Megamodel m) {
  std::string name = m.name;
  registry_.insert_or_assign(std::move(name), std::move(m));
}

ArchitectureContext Engine::context() const {
  key_cache_ = software_.keys();
  return ArchitectureContext{&registry_, &types_, &key_cache_};
}

Diagnostics Engine::load_architecture(ArchitectureDecl arch) {
  std::set<std::string, std::less<>> keys = software_.keys();
  Diagnostics diags = check_architecture(arch, ArchitectureContext{&registry_, &types_, &keys});
  if (has_errors(diags)) return diags;
  for (auto& [name, inst] : instances_)
    for (const auto& [slot, id] : inst->model_ids) store_.remove(id);
  instances_.clear();
  pending_.clear();
  arch_ = std::move(arch);
  for (const ModuleDecl& m : arch_.modules)
    if (m.kind == ModuleKind::megamodel) instantiate(m.source_ref, m.instance);
  return diags;
}

ModuleInstance& Engine::instantiate(const std::string& megamodel, const std::string& name) {
  auto mm = registry_.find(megamodel);
  if (mm == registry_.end()) throw EngineError("E-MODULE-REF", "unknown megamodel '" + megamodel + "'");
  if (instances_.count(name)) throw EngineError("E-NAME-DUP", "instance '" + name + "' already exists");
  for (const Operation& op : mm->second.operations)
    if (!arch_.find_use(name, op.name))
      throw EngineError("E-BIND-MISSING", "operation '" + name + "." + op.name + "' is not bound");
  auto inst = std::make_unique<ModuleInstance>();
  inst->name = name;
  inst->megamodel = mm->second;
  inst->created_at = now();
  create_instance_models(*inst);
  ModuleInstance& ref = *inst;
  instances_.emplace(name, std::move(inst));
  return ref;
}

void Engine::create_instance_models(ModuleInstance& inst) {
  for (const ModelSlot& slot : inst.megamodel.slots) {
    if (slot.megamodel_ref) continue;
    bool created_by_op = std::any_of(inst.megamodel.operations.begin(), inst.megamodel.operations.end(), [&](const Operation& op) {
      return std::any_of(op.usages.begin(), op.usages.end(),
                         [&](const ModelUsage& u) { return u.kind == UsageKind::create && u.slot == slot.name; });
    });
    if (created_by_op) continue;
    std::string id = inst.name + "." + slot.name;
    std::optional<Json> body = initializer_ ? initializer_(inst.name, slot) : std::nullopt;
    store_.put(id, slot.stereotype, body ? std::move(*body) : Json::object());
    inst.model_ids[slot.name] = id;
  }
}

const ModuleInstance* Engine::instance(std::string_view name) const {
  auto it = instances_.find(name);
  return it == instances_.end() ? nullptr : it->second.get();
}

ModuleInstance* Engine::instance(std::string_view name) {
  auto it = instances_.find(name);
  return it == instances_.end() ? nullptr : it->second.get();
}

std::vector<std::string> Engine::instance_names() const {
  std::vector<std::string> out;
  for (const auto& [n, _] : instances_) out.push_back(n);
  return out;
}

int Engine::layer_of(const std::string& instance) const {
  const ModuleDecl* m = arch_.find_module(instance);
  return m ? m->layer : 0;
}

void Engine::clear_logs() {
  trace_log_.clear();
  mutations_.clear();
  run_log_.clear();
  aborted_runs_ = 0;
}

void Engine::record_mutation(const std::string& kind, const std::string& detail) {
  mutations_.push_back(Mutation{now(), kind, detail, in_interception(), ++order_});
}

// ---------------------------------------------------------------------------
// Execution

void Engine::trace(TraceKind kind, const std::string& instance, const std::string& name, const std::string& detail,
                   RunResult* result) {
  if (!trace_enabled_) return;
  TraceEntry e{now(), instance, kind, name, detail, std::max(0, static_cast<int>(frames_.size()) - 1)};
  if (trace_sink_) trace_sink_(e);
  if (result) result->trace.push_back(e);
  trace_log_.push_back(std::move(e));
}

RunResult Engine::execute_run(const std::string& instance, const std::string& initial_state) {
  ModuleInstance* inst = this->instance(instance);
  if (!inst) throw EngineError("E-NO-INSTANCE", "no instance '" + instance + "'");
  RunResult r;
  try {
    r = execute(*inst, initial_state, "direct");
  } catch (...) {
    if (frames_.empty()) quiescent_cleanup();
    throw;
  }
  if (frames_.empty()) quiescent_cleanup();
  return r;
}

RunResult Engine::execute(ModuleInstance& inst, const std::string& initial_state, const std::string& cause) {
  if (inst.running) throw EngineError("E-REENTRY", "instance '" + inst.name + "' is already running");
  const ControlState* init = inst.megamodel.find_state(initial_state);
  if (!init || !init->initial)
    throw EngineError("E-STATE-UNKNOWN", "'" + initial_state + "' is not an initial state of '" + inst.name + "'");

  RunResult result;
  result.instance = inst.name;
  result.initial_state = initial_state;
  result.start = now();
  RunRecord rec;
  rec.run_index = inst.history.runs.size() + 1;
  rec.start = result.start;
  rec.initial_state = initial_state;
  const std::uint64_t start_order = ++order_;
  inst.running = true;
  frames_.push_back(Frame{&inst, &rec});
  const int depth = static_cast<int>(frames_.size()) - 1;

  auto finish = [&](const std::string& final_state, bool aborted) {
    rec.final_state = final_state;
    rec.aborted = aborted;
    rec.end = now();
    result.final_state = final_state;
    result.aborted = aborted;
    result.end = rec.end;
    inst.history.runs.push_back(std::move(rec));
    inst.running = false;
    inst.last_run_end = result.end;
    if (run_logging_)
      run_log_.push_back(RunLogEntry{inst.name, initial_state, final_state, result.start, result.end, aborted, depth,
                                      cause, start_order, ++order_});
    if (aborted) ++aborted_runs_;
  };

  try {
    trace(TraceKind::run_start, inst.name, initial_state, cause, &result);
    trace(TraceKind::enter_state, inst.name, initial_state, {}, &result);
    const Megamodel& mm = inst.megamodel;
    const Endpoint* next = mm.flow_from(Endpoint{initial_state, {}});
    if (!next) throw EngineError("E-FLOW", "no flow leaves '" + initial_state + "'");
    Endpoint node = *next;
    std::string final_state;
    for (;;) {
      if (const ControlState* s = mm.find_state(node.node)) {
        if (!s->final) throw EngineError("E-FLOW", "flow enters initial state '" + s->name + "'");
        final_state = s->name;
        result.destructed = s->destruction;
        trace(TraceKind::enter_state, inst.name, s->name, s->destruction ? "destruction" : "", &result);
        break;
      }
      if (const DecisionNode* d = mm.find_decision(node.node)) {
        const DecisionBranch* taken = nullptr;
        std::size_t index = 0;
        for (std::size_t i = 0; i < d->branches.size() && !taken; ++i) {
          const DecisionBranch& b = d->branches[i];
          if (b.is_else || (b.expr && cond::eval_condition(*b.expr, inst.history, &rec, now()))) {
            taken = &b;
            index = i;
          }
        }
        if (!taken) throw EngineError("E-FLOW", "decision '" + d->name + "' has no applicable branch");
        trace(TraceKind::decision, inst.name, d->name, taken->is_else ? "else" : "branch " + std::to_string(index),
              &result);
        node = taken->target;
        continue;
      }
      if (const Operation* op = mm.find_operation(node.node)) {
        std::string exit = invoke(inst, *op, node.compartment, result);
        next = mm.flow_from(Endpoint{op->name, exit});
        if (!next) throw EngineError("E-FLOW", "no flow leaves '" + op->name + "." + exit + "'");
        node = *next;
        continue;
      }
      throw EngineError("E-FLOW", "flow reaches unknown node '" + node.node + "'");
    }
    trace(TraceKind::run_end, inst.name, final_state, {}, &result);
    frames_.pop_back();
    finish(final_state, false);
  } catch (const EngineError& e) {
    result.error = e.what();
    trace(TraceKind::error, inst.name, e.code(), e.what(), &result);
    frames_.pop_back();
    finish(kAbortedState, true);
    throw;
  } catch (const std::exception& e) {
    result.error = e.what();
    trace(TraceKind::error, inst.name, "E-OP-FAILED", e.what(), &result);
    frames_.pop_back();
    finish(kAbortedState, true);
    throw EngineError("E-OP-FAILED", "run of '" + inst.name + "' aborted: " + e.what());
  }
  if (result.destructed) doomed_.push_back(inst.name);
  return result;
}

std::string Engine::invoke(ModuleInstance& inst, const Operation& op, const std::string& entry, RunResult& result) {
  intercept(EventPattern::Kind::before, op.name);
  Ticks start = now();
  trace(TraceKind::op_start, inst.name, op.name, entry, &result);
  std::string exit;
  if (op.kind == OperationKind::basic) {
    exit = dispatch_basic(inst, op);
  } else {
    exit = invoke_complex(inst, op, entry);
    if (trace_enabled_) {
      // The callee's entries are already in the engine log; fold them into
      // this run's trace too so a RunResult shows the whole call tree.
      auto first = std::find_if(trace_log_.rbegin(), trace_log_.rend(), [&](const TraceEntry& e) {
                     return e.kind == TraceKind::op_start && e.instance == inst.name && e.name == op.name;
                   }).base();
      result.trace.insert(result.trace.end(), first, trace_log_.end());
    }
  }
  if (!op.has_exit(exit))
    throw EngineError("E-EXIT-UNKNOWN", "'" + op.name + "' returned undeclared exit '" + exit + "'");
  frames_.back().record->ops.push_back(OpExecution{op.name, exit, start, now()});
  trace(TraceKind::op_end, inst.name, op.name, exit, &result);
  intercept(EventPattern::Kind::after, op.name);
  return exit;
}

std::string Engine::dispatch_basic(ModuleInstance& inst, const Operation& op) {
  const UseEdge* use = arch_.find_use(inst.name, op.name);
  if (!use) throw EngineError("E-BIND-MISSING", "operation '" + inst.name + "." + op.name + "' is not bound");
  std::string key = use->target;
  if (!use->target_is_key) {
    const ModuleDecl* target = arch_.find_module(use->target);
    if (!target || target->kind != ModuleKind::software)
      throw EngineError("E-USE-KIND", "operation '" + op.name + "' is not bound to a software module");
    key = target->source_ref;
  }
  const SoftwareOperation* fn = software_.find(key);
  if (!fn) throw EngineError("E-BIND-UNKNOWN", "no software module registered as '" + key + "'");

  auto slot_id = [&](const std::string& slot) {
    auto it = inst.model_ids.find(slot);
    return it != inst.model_ids.end() ? it->second : inst.name + "." + slot;
  };
  for (const ModelUsage& u : op.usages) {
    if (u.kind != UsageKind::create) continue;
    const ModelSlot* slot = inst.megamodel.find_slot(u.slot);
    std::string id = slot_id(u.slot);
    store_.put(id, slot ? slot->stereotype : ModelStereotype::none, Json::object());
    inst.model_ids[u.slot] = id;
  }
  OperationContext ctx(*this, inst.name, op, key);
  std::string exit = (*fn)(ctx);
  for (const ModelUsage& u : op.usages) {
    if (u.kind == UsageKind::write || u.kind == UsageKind::annotate) store_.touch(slot_id(u.slot));
    if (u.kind == UsageKind::destroy) {
      store_.remove(slot_id(u.slot));
      inst.model_ids.erase(u.slot);
    }
  }
  return exit;
}

std::string Engine::invoke_complex(ModuleInstance& inst, const Operation& op, const std::string& entry) {
  const UseEdge* use = arch_.find_use(inst.name, op.name);
  if (!use) throw EngineError("E-BIND-MISSING", "operation '" + inst.name + "." + op.name + "' is not bound");
  ModuleInstance* callee = use->target_is_key ? nullptr : instance(use->target);
  if (!callee) throw EngineError("E-USE-KIND", "operation '" + op.name + "' is not bound to a megamodel module");
  std::string state = entry;
  if (state.empty()) {
    Signature sig = signature_of(callee->megamodel);
    if (!sig.single_entry) throw EngineError("E-FLOW", "ambiguous implicit entry into '" + callee->name + "'");
    state = *sig.entry_states.begin();
  }

  // Caller models named by the operation's usages stand in for the
  // callee's same-named models for the duration of the invocation.
  std::map<std::string, std::optional<std::string>> saved;
  for (const ModelUsage& u : op.usages) {
    auto it = inst.model_ids.find(u.slot);
    if (it == inst.model_ids.end() || saved.count(u.slot)) continue;
    auto old = callee->model_ids.find(u.slot);
    saved[u.slot] = old == callee->model_ids.end() ? std::nullopt : std::optional<std::string>(old->second);
    callee->model_ids[u.slot] = it->second;
  }
  auto restore = [&] {
    for (auto& [slot, id] : saved) {
      if (id) {
        callee->model_ids[slot] = *id;
      } else {
        callee->model_ids.erase(slot);
      }
    }
  };
  RunResult r;
  try {
    r = execute(*callee, state, "invoke");
  } catch (...) {
    restore();
    throw;
  }
  restore();
  return r.final_state;
}

void Engine::intercept(EventPattern::Kind phase, const std::string& op) {
  struct Hit {
    std::string sensor;
    std::string initial;
    Ticks period;
  };
  std::vector<Hit> hits;
  Event ev;
  bool built = false;
  for (const SenseEdge& s : arch_.senses) {
    if (!s.trigger || !s.trigger->intercepts()) continue;
    if (!built) {
      ev.type = std::string(phase == EventPattern::Kind::before ? "Before[" : "After[") + op + "]";
      ev.source = frames_.back().instance->name;
      ev.timestamp = now();
      ev.phase = phase;
      ev.op = op;
      for (const Frame& f : frames_) ev.call_chain.push_back(f.instance->name);
      built = true;
    }
    if (match_event(*s.trigger, ev, s.sensed, types_))
      hits.push_back(Hit{s.sensor, s.trigger->initial_state, s.trigger->period.value_or(0)});
  }
  for (const Hit& h : hits) {
    ModuleInstance* sensor = instance(h.sensor);
    if (!sensor || sensor->running) continue;
    if (sensor->last_run_end && now() - *sensor->last_run_end < h.period) {
      trace(TraceKind::intercept, h.sensor, ev.type, "skipped (period)", nullptr);
      continue;
    }
    trace(TraceKind::intercept, h.sensor, ev.type, "from " + ev.source, nullptr);
    ++interception_depth_;
    try {
      execute(*sensor, h.initial, "intercept");
    } catch (const EngineError&) {
      // The interceptor's own run is recorded as aborted; the intercepted
      // run continues.
    }
    --interception_depth_;
  }
}

void Engine::remove_module_from_arch(ArchitectureDecl& arch, const std::string& name) const {
  auto& m = arch.modules;
  m.erase(std::remove_if(m.begin(), m.end(), [&](const ModuleDecl& d) { return d.instance == name; }), m.end());
  auto& u = arch.uses;
  u.erase(std::remove_if(u.begin(), u.end(),
                         [&](const UseEdge& e) { return e.module == name || (!e.target_is_key && e.target == name); }),
          u.end());
  auto& s = arch.senses;
  s.erase(std::remove_if(s.begin(), s.end(), [&](const SenseEdge& e) { return e.sensor == name || e.sensed == name; }),
          s.end());
  auto& f = arch.effects;
  f.erase(std::remove_if(f.begin(), f.end(), [&](const EffectEdge& e) { return e.source == name || e.target == name; }),
          f.end());
  auto& b = arch.model_bindings;
  b.erase(std::remove_if(b.begin(), b.end(), [&](const ModelBinding& e) { return e.module == name || e.target == name; }),
          b.end());
}

void Engine::destroy_instance(const std::string& name) {
  auto it = instances_.find(name);
  if (it == instances_.end()) return;
  for (const auto& [slot, id] : it->second->model_ids)
    if (id.rfind(name + ".", 0) == 0) store_.remove(id);
  instances_.erase(it);
  pending_.erase(std::remove_if(pending_.begin(), pending_.end(), [&](const Activation& a) { return a.instance == name; }),
                 pending_.end());
}

void Engine::quiescent_cleanup() {
  std::vector<std::string> doomed;
  doomed.swap(doomed_);
  for (const std::string& name : doomed) {
    remove_module_from_arch(arch_, name);
    destroy_instance(name);
    record_mutation("destroy", name);
  }
}

// ---------------------------------------------------------------------------
// Scheduling

void Engine::on_event(const Event& e) {
  if (e.is_interception()) return;
  for (const SenseEdge& s : arch_.senses) {
    if (!s.trigger || s.trigger->events.empty()) continue;
    if (!match_event(*s.trigger, e, s.sensed, types_)) continue;
    if (!instance(s.sensor)) continue;
    const std::string& state = s.trigger->initial_state;
    bool queued = std::any_of(pending_.begin(), pending_.end(), [&](const Activation& a) {
      return a.instance == s.sensor && a.initial_state == state;
    });
    if (queued) continue;
    pending_.push_back(Activation{s.sensor, state, e, e.timestamp, s.trigger->period.value_or(0), ++seq_});
  }
}

std::optional<Ticks> Engine::gate_open(const ModuleInstance& inst, Ticks period) const {
  if (!inst.last_run_end) return std::nullopt;
  return *inst.last_run_end + period;
}

std::optional<Activation> Engine::next_action() {
  const Ticks t = now();
  for (const SenseEdge& s : arch_.senses) {
    if (!s.trigger || !s.trigger->periodic_only() || !s.trigger->period) continue;
    const ModuleInstance* inst = instance(s.sensor);
    if (!inst) continue;
    const std::string& state = s.trigger->initial_state;
    bool queued = std::any_of(pending_.begin(), pending_.end(), [&](const Activation& a) {
      return a.instance == s.sensor && a.initial_state == state;
    });
    if (queued) continue;
    Ticks open = gate_open(*inst, *s.trigger->period).value_or(inst->created_at);
    if (t >= open) pending_.push_back(Activation{s.sensor, state, std::nullopt, open, *s.trigger->period, ++seq_});
  }

  auto best = pending_.end();
  for (auto it = pending_.begin(); it != pending_.end(); ++it) {
    const ModuleInstance* inst = instance(it->instance);
    if (!inst || inst->running) continue;
    if (auto open = gate_open(*inst, it->period); open && t < *open) continue;
    if (best == pending_.end()) {
      best = it;
      continue;
    }
    auto key = [&](const Activation& a) { return std::tuple(a.enqueue_time, layer_of(a.instance), a.instance, a.seq); };
    if (key(*it) < key(*best)) best = it;
  }
  if (best == pending_.end()) return std::nullopt;
  Activation a = std::move(*best);
  pending_.erase(best);
  return a;
}

std::optional<Ticks> Engine::next_wakeup() const {
  std::optional<Ticks> out;
  auto consider = [&](Ticks t) {
    if (!out || t < *out) out = t;
  };
  for (const Activation& a : pending_) {
    const ModuleInstance* inst = instance(a.instance);
    if (!inst) continue;
    consider(std::max(a.enqueue_time, gate_open(*inst, a.period).value_or(a.enqueue_time)));
  }
  for (const SenseEdge& s : arch_.senses) {
    if (!s.trigger || !s.trigger->periodic_only() || !s.trigger->period) continue;
    const ModuleInstance* inst = instance(s.sensor);
    if (!inst) continue;
    bool queued = std::any_of(pending_.begin(), pending_.end(), [&](const Activation& a) {
      return a.instance == s.sensor && a.initial_state == s.trigger->initial_state;
    });
    if (!queued) consider(gate_open(*inst, *s.trigger->period).value_or(inst->created_at));
  }
  return out;
}

void Engine::restore_pending(std::deque<Activation> p) {
  pending_ = std::move(p);
  for (const Activation& a : pending_) seq_ = std::max(seq_, a.seq);
}

RunResult Engine::run_activation(const Activation& a) {
  RunResult r;
  r.instance = a.instance;
  r.initial_state = a.initial_state;
  ModuleInstance* inst = instance(a.instance);
  if (!inst) {
    r.aborted = true;
    r.error = "E-NO-INSTANCE: no instance '" + a.instance + "'";
    return r;
  }
  std::string cause = a.cause ? a.cause->type : "period";
  try {
    r = execute(*inst, a.initial_state, cause);
  } catch (const EngineError& e) {
    r.aborted = true;
    r.final_state = kAbortedState;
    r.error = e.what();
  }
  quiescent_cleanup();
  return r;
}

bool Engine::step() {
  bool did = process_inbox();
  if (auto a = next_action()) {
    run_activation(*a);
    return true;
  }
  return did;
}

void Engine::post_event(Event e) {
  {
    std::lock_guard lk(inbox_mu_);
    inbox_.push_back(InboxItem{std::move(e)});
  }
  inbox_cv_.notify_all();
}

void Engine::post(std::function<void(Engine&)> command) {
  {
    std::lock_guard lk(inbox_mu_);
    inbox_.push_back(InboxItem{std::move(command)});
  }
  inbox_cv_.notify_all();
}

bool Engine::process_inbox() {
  if (busy()) return false;
  bool any = false;
  for (;;) {
    std::deque<InboxItem> items;
    {
      std::lock_guard lk(inbox_mu_);
      items.swap(inbox_);
    }
    if (items.empty()) break;
    any = true;
    for (InboxItem& it : items) {
      if (auto* e = std::get_if<Event>(&it.item)) {
        on_event(*e);
      } else {
        std::get<std::function<void(Engine&)>>(it.item)(*this);
      }
    }
  }
  return any;
}

void Engine::stop() {
  {
    std::lock_guard lk(inbox_mu_);
    stop_ = true;
  }
  inbox_cv_.notify_all();
}

bool Engine::stopped() const {
  std::lock_guard lk(inbox_mu_);
  return stop_;
}

void Engine::run_realtime() {
  while (!stopped()) {
    process_inbox();
    if (stopped()) break;
    if (auto a = next_action()) {
      run_activation(*a);
      continue;
    }
    std::optional<Ticks> wake = next_wakeup();
    std::unique_lock lk(inbox_mu_);
    auto ready = [&] { return stop_ || !inbox_.empty(); };
    Ticks wait = wake ? std::max<Ticks>(0, *wake - now()) : 100 * kTicksPerMilli;
    inbox_cv_.wait_for(lk, std::chrono::microseconds(wait), ready);
  }
}

// ---------------------------------------------------------------------------
// Reflection

ReflectionView Engine::reflect_query(const std::string& name) const {
  const ModuleInstance* inst = instance(name);
  if (!inst) throw EngineError("E-NO-INSTANCE", "no instance '" + name + "'");
  ReflectionView v;
  v.instance = name;
  v.megamodel = inst->megamodel.name;
  v.fld = serialize_fld(inst->megamodel);
  v.layer = layer_of(name);
  v.model_bindings = inst->model_ids;
  for (const ModelBinding& b : arch_.model_bindings)
    if (b.module == name) v.model_bindings[b.slot] = "instance:" + b.target;
  for (const RunRecord& r : inst->history.runs) {
    if (r.aborted) continue;
    ++v.run_count;
    v.last_final_state = r.final_state;
    for (const OpExecution& op : r.ops) ++v.exit_counts[op.op + " -> " + op.exit];
  }
  v.history = inst->history;
  return v;
}

void Engine::replace_model(const std::string& name, const std::string& slot, Json body) {
  const ModuleInstance* inst = instance(name);
  if (!inst) throw EngineError("E-EDIT-INVALID", "no instance '" + name + "'");
  const ModelSlot* s = inst->megamodel.find_slot(slot);
  if (!s || s->megamodel_ref) throw EngineError("E-EDIT-INVALID", "'" + name + "' has no replaceable model '" + slot + "'");
  auto apply = [name, slot, body = std::move(body)](Engine& e) mutable {
    ModuleInstance* i = e.instance(name);
    if (!i) return;
    const ModelSlot* sl = i->megamodel.find_slot(slot);
    if (!sl) return;
    auto it = i->model_ids.find(slot);
    std::string id = it != i->model_ids.end() ? it->second : name + "." + slot;
    e.store_.put(id, sl->stereotype, std::move(body));
    i->model_ids[slot] = id;
    e.record_mutation("replaceModel", name + "." + slot);
  };
  if (!busy() || in_interception()) {
    apply(*this);
  } else {
    post(std::move(apply));
  }
}

void Engine::set_decision_condition(const std::string& name, const std::string& decision, std::size_t branch,
                                    const std::string& condition) {
  const ModuleInstance* inst = instance(name);
  if (!inst) throw EngineError("E-EDIT-INVALID", "no instance '" + name + "'");
  Megamodel copy = inst->megamodel;
  DecisionNode* d = copy.find_decision(decision);
  if (!d || branch >= d->branches.size() || d->branches[branch].is_else)
    throw EngineError("E-EDIT-INVALID", "no conditional branch " + std::to_string(branch) + " in '" + decision + "'");
  Parsed<cond::ExprPtr> expr = cond::parse_condition(condition);
  if (!expr) throw EngineError("E-EDIT-INVALID", expr.diagnostics.front().message);
  d->branches[branch].condition = condition;
  d->branches[branch].expr = *expr;
  Diagnostics diags = check_megamodel(copy);
  if (has_errors(diags)) throw EngineError("E-EDIT-INVALID", diags.front().code + ": " + diags.front().message);
  auto apply = [name, decision, branch, condition, e = *expr](Engine& eng) {
    ModuleInstance* i = eng.instance(name);
    if (!i) return;
    DecisionNode* dn = i->megamodel.find_decision(decision);
    if (!dn || branch >= dn->branches.size()) return;
    dn->branches[branch].condition = condition;
    dn->branches[branch].expr = e;
    eng.record_mutation("setDecisionCondition", name + "." + decision + "[" + std::to_string(branch) + "] " + condition);
  };
  if (!busy() || in_interception()) {
    apply(*this);
  } else {
    post(std::move(apply));
  }
}

void Engine::rebind_use(const std::string& module, const std::string& op, const std::string& target,
                        bool target_is_key) {
  ArchitectureDecl copy = arch_;
  UseEdge* use = copy.find_use(module, op);
  if (!use) throw EngineError("E-EDGE-REF", "no use edge '" + module + "." + op + "'");
  use->target = target;
  use->target_is_key = target_is_key;
  Diagnostics diags = check_use_edge(copy, *use, context());
  if (!diags.empty()) throw EngineError(diags.front().code, diags.front().message);
  diags = check_architecture(copy, context());
  if (has_errors(diags)) throw EngineError(diags.front().code, diags.front().message);
  auto apply = [module, op, target, target_is_key](Engine& e) {
    if (UseEdge* u = e.arch_.find_use(module, op)) {
      u->target = target;
      u->target_is_key = target_is_key;
      e.record_mutation("rebind", module + "." + op + " -> " + target);
    }
  };
  if (!busy()) {
    apply(*this);
  } else {
    post(std::move(apply));
  }
}

void Engine::set_trigger(const std::string& sensor, const std::string& sensed, const std::string& trigger) {
  ArchitectureDecl copy = arch_;
  auto it = std::find_if(copy.senses.begin(), copy.senses.end(),
                         [&](const SenseEdge& s) { return s.sensor == sensor && s.sensed == sensed; });
  if (it == copy.senses.end()) throw EngineError("E-EDGE-REF", "no sense edge " + sensor + " <- " + sensed);
  Parsed<TriggerSpec> spec = parse_trigger(trigger);
  if (!spec) throw EngineError(spec.diagnostics.front().code, spec.diagnostics.front().message);
  it->trigger_text = trigger;
  it->trigger = *spec;
  Diagnostics diags = check_architecture(copy, context());
  if (has_errors(diags)) throw EngineError(diags.front().code, diags.front().message);
  auto apply = [copy = std::move(copy), sensor, sensed, trigger](Engine& e) mutable {
    e.arch_ = std::move(copy);
    e.record_mutation("setTrigger", sensor + " <- " + sensed + " \"" + trigger + "\"");
  };
  if (!busy()) {
    apply(*this);
  } else {
    post(std::move(apply));
  }
}

void Engine::commit_structure(ArchitectureDecl arch, MegamodelRegistry registry, const std::string& what) {
  if (busy()) throw EngineError("E-NOT-QUIESCENT", "structural change requested during a run");
  std::set<std::string, std::less<>> keys = software_.keys();
  Diagnostics diags = check_architecture(arch, ArchitectureContext{&registry, &types_, &keys});
  if (has_errors(diags)) {
    const Diagnostic& d = *std::find_if(diags.begin(), diags.end(), [](const Diagnostic& x) { return x.severity == Severity::error; });
    throw EngineError("E-PATCH-INVALID", d.code + ": " + d.message + (d.path.empty() ? "" : " [" + d.path + "]"));
  }
  std::vector<std::string> removed;
  for (const auto& [name, inst] : instances_) {
    const ModuleDecl* m = arch.find_module(name);
    if (!m || m->kind != ModuleKind::megamodel || m->source_ref != inst->megamodel.name) removed.push_back(name);
  }
  registry_ = std::move(registry);
  arch_ = std::move(arch);
  for (const std::string& name : removed) destroy_instance(name);
  for (const ModuleDecl& m : arch_.modules)
    if (m.kind == ModuleKind::megamodel && !instances_.count(m.instance)) instantiate(m.source_ref, m.instance);
  record_mutation("structure", what);
}

void Engine::restore(EventTypeRegistry types, MegamodelRegistry registry, ArchitectureDecl arch,
                     std::vector<ModuleInstance> instances, ModelStore store, std::deque<Activation> pending,
                     Ticks now) {
  if (busy()) throw EngineError("E-NOT-QUIESCENT", "restore requested during a run");
  types_ = std::move(types);
  registry_ = std::move(registry);
  arch_ = std::move(arch);
  instances_.clear();
  for (ModuleInstance& i : instances) {
    i.running = false;
    std::string name = i.name;
    instances_.emplace(std::move(name), std::make_unique<ModuleInstance>(std::move(i)));
  }
  store_ = std::move(store);
  restore_pending(std::move(pending));
  doomed_.clear();
  clear_logs();
  reanchor(now);
}

}  // namespace megart

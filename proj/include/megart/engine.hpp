#pragma once

// The interpreter and its scheduler. One engine owns the live layer diagram,
// the loaded megamodels, one instance per megamodel module, and the model
// store. All execution happens on the thread that calls step()/run_*();
// other threads talk to the engine only through post_event()/post().

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "megart/clock.hpp"
#include "megart/condition.hpp"
#include "megart/metamodel.hpp"
#include "megart/models.hpp"
#include "megart/trigger.hpp"

namespace megart {

class Engine;

enum class TraceKind { run_start, enter_state, op_start, op_end, decision, run_end, intercept, error };

std::string_view to_string(TraceKind k);

struct TraceEntry {
  Ticks time = 0;
  std::string instance;
  TraceKind kind = TraceKind::op_start;
  std::string name;
  std::string detail;  // exit, branch, final state, or error text
  int depth = 0;       // nesting of complex invocations and interceptions
};

/// "0.010000 selfRepair opEnd Update done"
std::string format_trace(const TraceEntry& e);

struct RunResult {
  std::string instance;
  std::string initial_state;
  std::string final_state;
  bool destructed = false;
  bool aborted = false;
  std::string error;
  Ticks start = 0;
  Ticks end = 0;
  std::vector<TraceEntry> trace;
};

/// What a software module sees while one of its operations executes.
class OperationContext {
 public:
  OperationContext(Engine& engine, const std::string& instance, const Operation& op, const std::string& key)
      : engine_(engine), instance_(instance), op_(op), key_(key) {}

  Engine& engine() { return engine_; }
  const std::string& instance() const { return instance_; }
  const Operation& operation() const { return op_; }
  const std::string& software_key() const { return key_; }

  bool has_model(std::string_view slot) const;
  /// The model bound to `slot` for this invocation. Throws E-MODEL-MISSING.
  RuntimeModel& model(std::string_view slot);
  /// Instance bound to a megamodel-ref slot. Throws E-MODEL-MISSING.
  std::string bound_instance(std::string_view slot) const;

  Ticks now() const;
  /// Simulated work: advances a virtual clock, sleeps on a real one.
  void spend(Ticks d);
  void emit(Event e);

 private:
  Engine& engine_;
  const std::string& instance_;
  const Operation& op_;
  const std::string& key_;
};

/// A software module operation returns the exit it took.
using SoftwareOperation = std::function<std::string(OperationContext&)>;

class SoftwareRegistry {
 public:
  void add(const std::string& key, SoftwareOperation fn) { ops_[key] = std::move(fn); }
  const SoftwareOperation* find(std::string_view key) const {
    auto it = ops_.find(key);
    return it == ops_.end() ? nullptr : &it->second;
  }
  std::set<std::string, std::less<>> keys() const {
    std::set<std::string, std::less<>> out;
    for (const auto& [k, _] : ops_) out.insert(k);
    return out;
  }

 private:
  std::map<std::string, SoftwareOperation, std::less<>> ops_;
};

/// Initial body for a model slot that is neither created by an operation nor
/// a megamodel reference. Returning nullopt yields an empty object.
using ModelInitializer = std::function<std::optional<Json>(const std::string& instance, const ModelSlot& slot)>;

struct ModuleInstance {
  std::string name;
  Megamodel megamodel;  // live copy; reflective edits change it
  std::map<std::string, std::string> model_ids;  // slot -> model store id
  ExecutionHistory history;
  bool running = false;
  std::optional<Ticks> last_run_end;
  Ticks created_at = 0;
};

struct Activation {
  std::string instance;
  std::string initial_state;
  std::optional<Event> cause;
  Ticks enqueue_time = 0;
  Ticks period = 0;
  std::uint64_t seq = 0;
};

/// Audit record of one structural or reflective change.
struct Mutation {
  Ticks time = 0;
  std::string kind;  // "patch", "rebind", "replaceModel", "destroy", ...
  std::string detail;
  bool during_interception = false;
  std::uint64_t order = 0;  // position in the engine's global event order
};

struct RunLogEntry {
  std::string instance;
  std::string initial_state;
  std::string final_state;
  Ticks start = 0;
  Ticks end = 0;
  bool aborted = false;
  int depth = 0;
  std::string cause;  // event type, "period", "intercept", "invoke", or "direct"
  std::uint64_t start_order = 0;
  std::uint64_t end_order = 0;
};

struct ReflectionView {
  std::string instance;
  std::string megamodel;
  std::string fld;  // serialized live megamodel
  int layer = 0;
  std::map<std::string, std::string> model_bindings;  // slot -> model id or "instance:<name>"
  std::uint64_t run_count = 0;
  std::string last_final_state;
  std::map<std::string, std::uint64_t> exit_counts;  // "Op -> exit"
  ExecutionHistory history;
};

class Engine {
 public:
  Engine(Clock& clock, const SoftwareRegistry& software);
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  // -- loading ---------------------------------------------------------
  void add_megamodel(Megamodel m);
  void set_event_types(EventTypeRegistry types) { types_ = std::move(types); }
  void set_model_initializer(ModelInitializer init) { initializer_ = std::move(init); }
  /// Validates against the loaded megamodels and instantiates every
  /// megamodel module. On errors nothing changes.
  Diagnostics load_architecture(ArchitectureDecl arch);
  /// Registers an idle instance. Throws E-NAME-DUP, E-MODULE-REF.
  ModuleInstance& instantiate(const std::string& megamodel, const std::string& name);

  const ArchitectureDecl& architecture() const { return arch_; }
  const MegamodelRegistry& megamodels() const { return registry_; }
  const EventTypeRegistry& event_types() const { return types_; }
  const SoftwareRegistry& software() const { return software_; }
  ArchitectureContext context() const;
  const ModuleInstance* instance(std::string_view name) const;
  ModuleInstance* instance(std::string_view name);
  std::vector<std::string> instance_names() const;
  ModelStore& models() { return store_; }
  const ModelStore& models() const { return store_; }
  Clock& clock() { return clock_; }
  Ticks now() const { return clock_.now() + offset_; }
  /// Shifts engine time so that now() == t (snapshot import).
  void reanchor(Ticks t) { offset_ = t - clock_.now(); }

  // -- execution -------------------------------------------------------
  /// Runs `instance` from `initial_state` to a final state. Errors abort
  /// the run (recorded as ⊥(error)) and are rethrown as EngineError.
  RunResult execute_run(const std::string& instance, const std::string& initial_state);
  bool busy() const { return !frames_.empty(); }

  // -- scheduling ------------------------------------------------------
  void on_event(const Event& e);
  /// Oldest runnable activation, removed from the queue.
  std::optional<Activation> next_action();
  /// Earliest time at which next_action could return something.
  std::optional<Ticks> next_wakeup() const;
  const std::deque<Activation>& pending() const { return pending_; }
  void restore_pending(std::deque<Activation> p);
  /// Executes an activation; errors are logged, not thrown.
  RunResult run_activation(const Activation& a);
  /// Drains the inbox, then runs at most one activation. Returns whether
  /// anything happened.
  bool step();
  /// Real-time loop until stop() is called (from any thread).
  void run_realtime();
  void stop();
  bool stopped() const;

  // -- inbox (thread-safe) ----------------------------------------------
  void post_event(Event e);
  void post(std::function<void(Engine&)> command);
  /// Applies queued events and commands. Only acts when no run is active.
  bool process_inbox();

  // -- reflection ------------------------------------------------------
  ReflectionView reflect_query(const std::string& instance) const;
  /// Immediate inside an interception frame or at quiescence; otherwise
  /// deferred to the next quiescent point.
  void replace_model(const std::string& instance, const std::string& slot, Json body);
  void set_decision_condition(const std::string& instance, const std::string& decision, std::size_t branch,
                              const std::string& condition);
  /// Throws E-EDGE-REF / E-SIG-MISMATCH; quiescent only.
  void rebind_use(const std::string& module, const std::string& op, const std::string& target,
                  bool target_is_key = false);
  void set_trigger(const std::string& sensor, const std::string& sensed, const std::string& trigger);
  /// Replaces the architecture and registry wholesale after validation
  /// (patch application). Instances are reconciled; throws E-PATCH-INVALID.
  void commit_structure(ArchitectureDecl arch, MegamodelRegistry registry, const std::string& what);
  bool in_interception() const { return interception_depth_ > 0; }

  /// Replaces the whole engine state (snapshot import). The caller has
  /// validated the parts; instances keep their recorded models, history,
  /// and timing. Engine time is re-anchored to `now`. Logs are cleared.
  void restore(EventTypeRegistry types, MegamodelRegistry registry, ArchitectureDecl arch,
               std::vector<ModuleInstance> instances, ModelStore store, std::deque<Activation> pending, Ticks now);

  // -- observation -----------------------------------------------------
  void set_trace_sink(std::function<void(const TraceEntry&)> sink) { trace_sink_ = std::move(sink); }
  void set_trace_enabled(bool on) { trace_enabled_ = on; }
  void set_run_logging(bool on) { run_logging_ = on; }
  const std::vector<TraceEntry>& trace_log() const { return trace_log_; }
  const std::vector<Mutation>& mutations() const { return mutations_; }
  const std::vector<RunLogEntry>& run_log() const { return run_log_; }
  std::uint64_t aborted_runs() const { return aborted_runs_; }
  void clear_logs();
  void record_mutation(const std::string& kind, const std::string& detail);

 private:
  struct Frame {
    ModuleInstance* instance;
    RunRecord* record;
  };
  struct InboxItem {
    std::variant<Event, std::function<void(Engine&)>> item;
  };

  void trace(TraceKind kind, const std::string& instance, const std::string& name, const std::string& detail,
             RunResult* result);
  RunResult execute(ModuleInstance& inst, const std::string& initial_state, const std::string& cause);
  std::string invoke(ModuleInstance& inst, const Operation& op, const std::string& entry, RunResult& result);
  std::string dispatch_basic(ModuleInstance& inst, const Operation& op);
  std::string invoke_complex(ModuleInstance& inst, const Operation& op, const std::string& entry);
  void intercept(EventPattern::Kind phase, const std::string& op);
  void destroy_instance(const std::string& name);
  void remove_module_from_arch(ArchitectureDecl& arch, const std::string& name) const;
  void create_instance_models(ModuleInstance& inst);
  std::optional<Ticks> gate_open(const ModuleInstance& inst, Ticks period) const;
  int layer_of(const std::string& instance) const;
  void quiescent_cleanup();

  Clock& clock_;
  const SoftwareRegistry& software_;
  Ticks offset_ = 0;
  EventTypeRegistry types_;
  ModelInitializer initializer_;
  MegamodelRegistry registry_;
  ArchitectureDecl arch_;
  std::map<std::string, std::unique_ptr<ModuleInstance>, std::less<>> instances_;
  ModelStore store_;

  std::vector<Frame> frames_;
  int interception_depth_ = 0;
  std::vector<std::string> doomed_;  // destructed instances awaiting quiescence

  std::deque<Activation> pending_;
  std::uint64_t seq_ = 0;

  mutable std::mutex inbox_mu_;
  std::condition_variable inbox_cv_;
  std::deque<InboxItem> inbox_;
  bool stop_ = false;

  std::function<void(const TraceEntry&)> trace_sink_;
  bool trace_enabled_ = true;
  bool run_logging_ = true;
  std::vector<TraceEntry> trace_log_;
  std::vector<Mutation> mutations_;
  std::vector<RunLogEntry> run_log_;
  std::uint64_t aborted_runs_ = 0;
  mutable std::set<std::string, std::less<>> key_cache_;
  std::uint64_t order_ = 0;
};

}  // namespace megart

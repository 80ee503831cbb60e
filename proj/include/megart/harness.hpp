#pragma once

// A deterministic stand-in for a component-based adaptable system, plus the
// software modules that implement every operation used by the fixture
// megamodels.
//
// Registered keys:
//   harness.update            project the system into ArchitecturalModel
//   harness.checkFailures     exits failures / no_failures
//   harness.deepCheck         annotate root causes
//   harness.repair            plan per RepairStrategies; planned / no_strategy
//   harness.effect            apply and clear planned actions
//   harness.analyzeBottleneck exits bottleneck / no_bottleneck
//   harness.planParams, harness.effectParams
//   harness.evaluateStrategies, harness.synthesizeStrategies   (procedural reflection)
//   harness.monitorSelfRepair, harness.analyzeStrategies,
//   harness.planStrategies, harness.executeStrategies          (declarative reflection)
//   harness.createModel, harness.reconfigure                   (software update patch)

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "megart/engine.hpp"

namespace megart {

enum class Lifecycle { started, stopped, failed };

std::string_view to_string(Lifecycle l);

struct Component {
  std::string id;
  std::string name;
  Lifecycle lifecycle = Lifecycle::started;
  Json params = Json::object();
  std::optional<std::string> failure_kind;
  int version = 1;

  bool operator==(const Component&) const = default;
};

struct SystemState {
  std::map<std::string, Component> components;
  std::vector<std::pair<std::string, std::string>> connectors;
  double load = 0.3;

  bool operator==(const SystemState&) const = default;
  /// The projection that an up-to-date architectural model mirrors.
  Json projection() const;
};

/// Nine components in a shop-like topology (c1 ... c9), all started.
SystemState default_system();

struct HarnessOptions {
  std::string source = "mRUBiS";  // module instance that emits system events
  Ticks op_cost = 10 * kTicksPerMilli;
  double load_threshold = 0.8;
};

class Harness {
 public:
  explicit Harness(HarnessOptions options = {});

  SystemState& system() { return system_; }
  const SystemState& system() const { return system_; }
  const HarnessOptions& options() const { return options_; }

  /// Marks the component failed and returns the event to deliver
  /// (OutOfMemoryRtException for kind "oom", RtException otherwise).
  /// Throws E-NO-COMPONENT.
  Event inject_failure(const std::string& component, const std::string& kind, Ticks now);
  /// Sets the load; returns a LoadIncrease event when the load rises.
  std::optional<Event> set_load(double load, Ticks now);
  /// A client request: raises a runtime exception if it hits a failed
  /// component.
  std::optional<Event> request(Ticks now);

  void register_operations(SoftwareRegistry& registry);
  ModelInitializer initializer() const;
  static EventTypeRegistry default_event_types();

  /// Every event the harness produced, formatted, in order.
  const std::vector<std::string>& event_log() const { return event_log_; }
  /// Operation keys in dispatch order, with the exit taken.
  const std::vector<std::string>& dispatch_log() const { return dispatch_log_; }
  void clear_logs() {
    event_log_.clear();
    dispatch_log_.clear();
  }

 private:
  Event make_event(std::string type, Ticks now, Json payload);
  void apply_planned(Json& model);

  HarnessOptions options_;
  SystemState system_;
  std::vector<std::string> event_log_;
  std::vector<std::string> dispatch_log_;
};

}  // namespace megart

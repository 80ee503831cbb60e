#pragma once

// In-memory form of feedback loop diagrams (megamodels) and layer diagrams
// (architectures), plus the structural checks and derived properties that
// the interpreter relies on.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "megart/condition.hpp"
#include "megart/diagnostic.hpp"
#include "megart/trigger.hpp"

namespace megart {

enum class OperationKind { basic, complex };
enum class Activity { none, Monitor, Analyze, Plan, Execute };
enum class UsageKind { create, destroy, write, read, annotate };
enum class ModelStereotype {
  none,
  MonitoringModel,
  ExecutionModel,
  CausalConnectionModel,
  ReflectionModel,
  EvaluationModel,
  ChangeModel,
  AdaptationModel,
};

std::string_view to_string(Activity a);
std::string_view to_string(UsageKind k);
std::string_view to_string(ModelStereotype s);
std::optional<Activity> activity_from(std::string_view s);
std::optional<UsageKind> usage_from_keyword(std::string_view s);  // "reads", "writes", ...
std::string_view usage_keyword(UsageKind k);
std::optional<ModelStereotype> model_stereotype_from(std::string_view s);

struct ModelUsage {
  UsageKind kind = UsageKind::read;
  std::string slot;

  bool operator==(const ModelUsage&) const = default;
};

struct Operation {
  std::string name;
  std::string display_name;  // empty unless declared with `"..." as Name`
  OperationKind kind = OperationKind::basic;
  Activity activity = Activity::none;
  std::vector<std::string> entries;  // complex only
  std::vector<std::string> exits;
  std::vector<ModelUsage> usages;

  bool operator==(const Operation&) const = default;
  bool has_exit(std::string_view e) const;
};

struct ModelSlot {
  std::string name;
  std::string display_name;
  ModelStereotype stereotype = ModelStereotype::none;
  bool megamodel_ref = false;

  bool operator==(const ModelSlot&) const = default;
};

struct ControlState {
  std::string name;
  std::string display_name;
  bool initial = false;
  bool final = false;
  bool destruction = false;

  bool operator==(const ControlState&) const = default;
};

/// A flow endpoint: a state, decision, or operation, optionally qualified
/// by a compartment (exit when used as a source, entry as a target).
struct Endpoint {
  std::string node;
  std::string compartment;

  bool operator==(const Endpoint&) const = default;
  auto operator<=>(const Endpoint&) const = default;
};

std::string to_string(const Endpoint& e);

struct FlowEdge {
  Endpoint source;
  Endpoint target;

  bool operator==(const FlowEdge&) const = default;
};

struct DecisionBranch {
  bool is_else = false;
  std::string condition;  // source text; empty for else
  cond::ExprPtr expr;     // parsed form, kept in sync with `condition`
  Endpoint target;

  bool operator==(const DecisionBranch& o) const {
    return is_else == o.is_else && condition == o.condition && target == o.target;
  }
};

struct DecisionNode {
  std::string name;
  std::vector<DecisionBranch> branches;

  bool operator==(const DecisionNode&) const = default;
};

/// Source spans keyed by element path ("op:Repair", "flow:2", ...). Never
/// part of structural equality.
using SpanTable = std::map<std::string, SourceSpan>;

struct Megamodel {
  std::string name;
  std::vector<ModelSlot> slots;
  std::vector<ControlState> states;
  std::vector<Operation> operations;
  std::vector<DecisionNode> decisions;
  std::vector<FlowEdge> flows;
  SpanTable spans;

  /// Structural equality: everything except spans.
  bool operator==(const Megamodel& o) const {
    return name == o.name && slots == o.slots && states == o.states &&
           operations == o.operations && decisions == o.decisions && flows == o.flows;
  }

  const Operation* find_operation(std::string_view n) const;
  Operation* find_operation(std::string_view n);
  const ControlState* find_state(std::string_view n) const;
  const DecisionNode* find_decision(std::string_view n) const;
  DecisionNode* find_decision(std::string_view n);
  const ModelSlot* find_slot(std::string_view n) const;
  /// Target of the flow leaving `source`, if any.
  const Endpoint* flow_from(const Endpoint& source) const;
};

struct Signature {
  std::set<std::string> entry_states;
  std::set<std::string> exit_states;
  bool single_entry = false;
  bool single_exit = false;

  bool operator==(const Signature&) const = default;
};

/// Entry/exit states of a megamodel. Pure.
Signature signature_of(const Megamodel& m);

/// MAPE coverage label derived from operation activities: present letters in
/// M,A,P,E order, with ".." marking each gap between present letters
/// ("M..PE", "A", "MAPE"). Empty when no operation carries an activity.
std::string mape_label(const Megamodel& m);

/// Structural well-formedness. Empty iff the megamodel is valid.
Diagnostics check_megamodel(const Megamodel& m);

// ---------------------------------------------------------------------------
// Layer diagrams

struct Layer {
  int index = 0;
  std::string name;

  bool operator==(const Layer&) const = default;
};

enum class ModuleKind { megamodel, software };

struct ModuleDecl {
  std::string instance;
  ModuleKind kind = ModuleKind::megamodel;
  std::string source_ref;  // megamodel name or software registration key
  int layer = 0;

  bool operator==(const ModuleDecl&) const = default;
};

/// Binds `module.operation` to a megamodel module, a software module
/// instance, or (when `target_is_key`) directly to a software registration
/// key that is not drawn in the diagram.
struct UseEdge {
  std::string module;
  std::string operation;
  std::string target;
  bool target_is_key = false;

  bool operator==(const UseEdge&) const = default;
};

struct SenseEdge {
  std::string sensor;
  std::string sensed;
  std::string trigger_text;  // empty: no trigger
  std::optional<TriggerSpec> trigger;

  bool operator==(const SenseEdge& o) const {
    return sensor == o.sensor && sensed == o.sensed && trigger_text == o.trigger_text;
  }
};

enum class EffectMode { write, annotate };

struct EffectEdge {
  std::string source;
  std::string target;
  EffectMode mode = EffectMode::write;

  bool operator==(const EffectEdge&) const = default;
};

/// Procedural-reflection binding of a megamodel-ref slot to a live instance.
struct ModelBinding {
  std::string module;
  std::string slot;
  std::string target;

  bool operator==(const ModelBinding&) const = default;
};

struct ArchitectureDecl {
  std::string name;
  std::vector<Layer> layers;
  std::vector<ModuleDecl> modules;
  std::vector<UseEdge> uses;
  std::vector<SenseEdge> senses;
  std::vector<EffectEdge> effects;
  std::vector<ModelBinding> model_bindings;
  SpanTable spans;

  bool operator==(const ArchitectureDecl& o) const {
    return name == o.name && layers == o.layers && modules == o.modules && uses == o.uses &&
           senses == o.senses && effects == o.effects && model_bindings == o.model_bindings;
  }

  const ModuleDecl* find_module(std::string_view instance) const;
  const Layer* find_layer(int index) const;
  const UseEdge* find_use(std::string_view module, std::string_view op) const;
  UseEdge* find_use(std::string_view module, std::string_view op);
};

/// Order-insensitive comparison: same layers, modules, and edge sets.
bool equivalent(const ArchitectureDecl& a, const ArchitectureDecl& b);

using MegamodelRegistry = std::map<std::string, Megamodel, std::less<>>;

struct ArchitectureContext {
  const MegamodelRegistry* megamodels = nullptr;
  const EventTypeRegistry* event_types = nullptr;
  /// When set, software registration keys must appear here.
  const std::set<std::string, std::less<>>* software_keys = nullptr;
};

/// Checks bindings, signatures, triggers, layering, and use cycles.
Diagnostics check_architecture(const ArchitectureDecl& arch, const ArchitectureContext& ctx);

/// Checks a single use edge (signature compatibility for complex operations,
/// module kind for basic ones). Used when rebinding at runtime.
Diagnostics check_use_edge(const ArchitectureDecl& arch, const UseEdge& edge,
                           const ArchitectureContext& ctx);

}  // namespace megart

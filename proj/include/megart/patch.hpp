#pragma once

// Integration rules: named, ordered lists of structural steps applied to the
// live layer diagram all-or-nothing at a quiescent point.
//
//   patch "AddStrategiesLoop" {
//     load-megamodel file "../fld/self-repair-strategies.fld"
//     add-layer 2 "Layer-2"
//     add-module 2 strategies : "Self-repair-strategies"
//     add-sense strategies <- selfRepair [r] trigger "After[DeepCheck]; ; CheckStrategies"
//     add-effect strategies -> selfRepair [w]
//     bind-use strategies.EvaluateStrategies -> "harness.evaluateStrategies"
//     bind-model strategies.feedbackLoopModel -> selfRepair
//   }
//
// Other steps: unload-megamodel "Name", remove-layer INT, add-software INT
// IDENT : STRING, remove-module IDENT, remove-edge (sense a <- b | effect
// a -> b | use m.op | bind-model m.slot), set-trigger a <- b "trigger".
// `load-megamodel` also accepts an inline `megamodel "X" { ... }` block.

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "megart/diagnostic.hpp"
#include "megart/engine.hpp"
#include "megart/metamodel.hpp"

namespace megart {

namespace step {

struct LoadMegamodel {
  Megamodel megamodel;
};
struct UnloadMegamodel {
  std::string name;
};
struct AddLayer {
  Layer layer;
};
struct RemoveLayer {
  int index = 0;
};
struct AddModule {
  ModuleDecl module;
};
struct RemoveModule {
  std::string name;
};
struct AddSense {
  SenseEdge edge;
};
struct AddEffect {
  EffectEdge edge;
};
struct RemoveEdge {
  enum class Kind { sense, effect, use, bind_model };
  Kind kind = Kind::sense;
  std::string a;  // sensor / source / module
  std::string b;  // sensed / target / operation / slot
};
struct BindUse {
  UseEdge edge;
};
struct BindModel {
  ModelBinding binding;
};
struct SetTrigger {
  std::string sensor;
  std::string sensed;
  std::string text;
};

}  // namespace step

using PatchStepBody = std::variant<step::LoadMegamodel, step::UnloadMegamodel, step::AddLayer, step::RemoveLayer,
                                   step::AddModule, step::RemoveModule, step::AddSense, step::AddEffect,
                                   step::RemoveEdge, step::BindUse, step::BindModel, step::SetTrigger>;

struct PatchStep {
  PatchStepBody body;
  SourceSpan span;
};

struct Patch {
  std::string name;
  std::vector<PatchStep> steps;
};

/// `file` locates relative `load-megamodel file` paths. Loaded megamodels
/// are parsed and checked here.
Parsed<Patch> parse_patch(std::string_view text, const std::string& file = {});
Parsed<Patch> load_patch_file(const std::string& path);

std::string describe(const PatchStep& s);

struct PatchReport {
  std::string name;
  std::size_t steps = 0;
  std::vector<std::string> applied;  // one line per step
};

/// Computes the post-state of `patch` against the given structure without
/// touching any engine. Throws E-PATCH-RESOLVE / E-PATCH-INVALID.
void apply_steps(const Patch& patch, ArchitectureDecl& arch, MegamodelRegistry& registry);

/// Applies `patch` to a quiescent engine atomically. Throws
/// E-NOT-QUIESCENT, E-PATCH-RESOLVE, E-PATCH-INVALID; on error nothing
/// changes.
PatchReport apply_patch(Engine& engine, const Patch& patch);

/// Queues `patch` on the engine inbox; `done` runs on the engine thread
/// after application (error empty on success).
void submit_patch(Engine& engine, Patch patch,
                  std::function<void(const PatchReport&, const std::string& error)> done = {});

}  // namespace megart

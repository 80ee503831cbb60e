#pragma once

// Textual syntax for megamodels (.fld) and architectures (.ld).
//
//   megamodel "Self-repair-A" {
//     model ArchitecturalModel : ReflectionModel
//     initial Start
//     final OK
//     operation CheckForFailures <<Analyze>> {
//       exits { failures, no_failures }
//       annotates ArchitecturalModel
//     }
//     flow Start -> CheckForFailures
//     ...
//   }
//
//   architecture "Self-repair" {
//     layer 0 "Layer-0" { software mRUBiS : "harness.system" }
//     layer 1 "Layer-1" { module selfRepair : "Self-repair" }
//     sense selfRepair <- mRUBiS [r] trigger "RtException; 10s; Monitor;"
//     effect selfRepair -> mRUBiS [w]
//     use selfRepair.Update -> "harness.update"
//   }
//
// Identifiers match [A-Za-z_][A-Za-z0-9_-]*; a display name with spaces is
// written `"Check for failures" as CheckForFailures`. `#` starts a comment.

#include <string>
#include <string_view>

#include "megart/diagnostic.hpp"
#include "megart/metamodel.hpp"

namespace megart {

/// Parses one megamodel and validates it with check_megamodel. Never
/// returns a partial model.
Parsed<Megamodel> parse_fld(std::string_view text, const std::string& file = {});

/// Parses one architecture. Megamodel names stay unresolved; the
/// registry-independent architecture rules (layering, references) are
/// checked here.
Parsed<ArchitectureDecl> parse_ld(std::string_view text, const std::string& file = {});

/// Canonical text: slots, states, operations, decisions, flows, each in
/// declaration order.
std::string serialize_fld(const Megamodel& m);

/// Canonical text: layers with their modules, then sense, effect, use, and
/// bind-model edges.
std::string serialize_ld(const ArchitectureDecl& a);

bool is_identifier(std::string_view s);
std::string quote(std::string_view s);

}  // namespace megart

#pragma once

// Snapshots: the complete engine state as one JSON document that embeds
// .ld/.fld texts verbatim.
//
//   {
//     "format": "megart-snapshot/1",
//     "engineTime": <microseconds>,
//     "eventTypes": "<event declarations>",
//     "architecture": "<.ld text>",
//     "megamodels": { name: "<.fld text>" },
//     "instances": { name: { "megamodel", "fld" (live copy), "models" (slot -> id),
//                            "history", "lastRunEnd", "createdAt" } },
//     "runtimeModels": { id: { "kind", "body", "revision" } },
//     "pending": [ { "instance", "initialState", "cause", "enqueueTime", "period", "seq" } ]
//   }
//
// Keys are sorted, so exporting the same state twice yields the same bytes.

#include <string>
#include <string_view>

#include "megart/engine.hpp"

namespace megart {

inline constexpr std::string_view kSnapshotFormat = "megart-snapshot/1";

/// Requires quiescence (E-NOT-QUIESCENT).
Json export_snapshot(const Engine& engine);
std::string export_snapshot_text(const Engine& engine);

/// Replaces the state of `engine` (whose software registry must provide the
/// bound keys). Throws E-SNAP-PARSE on malformed or inconsistent input;
/// on error the engine is unchanged.
void import_snapshot(Engine& engine, std::string_view text);
void import_snapshot_json(Engine& engine, const Json& doc);

}  // namespace megart

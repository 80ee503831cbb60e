#pragma once

// File loading shared by the CLI, the control channel, and the tests.

#include <filesystem>
#include <string>

#include "megart/diagnostic.hpp"
#include "megart/engine.hpp"

namespace megart {

/// Whole file as text. Throws EngineError E-IO.
std::string read_file(const std::filesystem::path& path);
/// Throws EngineError E-IO.
void write_file(const std::filesystem::path& path, const std::string& text);

/// Parses every *.fld file in `dir` (sorted by name) into `out`. Returns
/// all diagnostics; E-NAME-DUP when two files declare the same megamodel.
Diagnostics load_fld_dir(const std::filesystem::path& dir, MegamodelRegistry& out);

struct LoadOptions {
  std::filesystem::path fld_dir;
  std::filesystem::path events_file;  // empty: keep the engine's event types
  std::filesystem::path ld_file;
};

/// Loads megamodels, event types, and the architecture into `engine`.
/// Returns the diagnostics; the engine is usable iff none is an error.
Diagnostics load_into(Engine& engine, const LoadOptions& opts);

}  // namespace megart

#include "megart/workspace.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "megart/dsl.hpp"

namespace megart {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EngineError("E-IO", "cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw EngineError("E-IO", "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw EngineError("E-IO", "write to '" + path.string() + "' failed");
}

Diagnostics load_fld_dir(const fs::path& dir, MegamodelRegistry& out) {
  Diagnostics diags;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    diags.push_back(Diagnostic{Severity::error, "E-IO", "not a directory", SourceSpan{dir.string()}, {}});
    return diags;
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".fld") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const fs::path& f : files) {
    Parsed<Megamodel> m = parse_fld(read_file(f), f.string());
    diags.insert(diags.end(), m.diagnostics.begin(), m.diagnostics.end());
    if (!m) continue;
    if (out.count(m->name)) {
      diags.push_back(Diagnostic{Severity::error, "E-NAME-DUP", "megamodel '" + m->name + "' declared twice",
                                 m->spans["megamodel"], "megamodel"});
      continue;
    }
    std::string name = m->name;
    out.emplace(std::move(name), std::move(*m));
  }
  return diags;
}

Diagnostics load_into(Engine& engine, const LoadOptions& opts) {
  Diagnostics diags;
  if (!opts.events_file.empty()) {
    Parsed<EventTypeRegistry> types = parse_event_types(read_file(opts.events_file), opts.events_file.string());
    diags.insert(diags.end(), types.diagnostics.begin(), types.diagnostics.end());
    if (!types) return diags;
    engine.set_event_types(std::move(*types));
  }
  MegamodelRegistry reg;
  Diagnostics d = load_fld_dir(opts.fld_dir, reg);
  diags.insert(diags.end(), d.begin(), d.end());
  if (has_errors(diags)) return diags;
  for (auto& [name, m] : reg) engine.add_megamodel(m);

  Parsed<ArchitectureDecl> arch = parse_ld(read_file(opts.ld_file), opts.ld_file.string());
  diags.insert(diags.end(), arch.diagnostics.begin(), arch.diagnostics.end());
  if (!arch) return diags;
  SpanTable spans = arch->spans;
  d = engine.load_architecture(std::move(*arch));
  for (Diagnostic& x : d)
    if (x.span.file.empty()) {
      auto it = spans.find(x.path);
      x.span = it != spans.end() ? it->second : spans["architecture"];
      if (x.span.file.empty()) x.span.file = opts.ld_file.string();
    }
  diags.insert(diags.end(), d.begin(), d.end());
  return diags;
}

}  // namespace megart

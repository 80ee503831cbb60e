#pragma once

// Shared helpers for the unit tests and the acceptance runner.

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "megart/control.hpp"
#include "megart/engine.hpp"
#include "megart/harness.hpp"
#include "megart/metamodel.hpp"

namespace support {

using namespace megart;

std::string fixture_path(const std::string& rel);
std::string fixture_text(const std::string& rel);
Megamodel fixture_fld(const std::string& rel);
ArchitectureDecl fixture_ld(const std::string& rel);
MegamodelRegistry fixture_registry();
std::vector<std::string> corpus_files(const std::string& subdir, const std::string& ext);

/// A harness-backed engine on a virtual clock, loaded from an LD fixture.
struct Rig {
  explicit Rig(const std::string& ld_rel, HarnessOptions options = {});
  /// Loads from LD text instead of a file.
  static std::unique_ptr<Rig> from_text(const std::string& ld_text, HarnessOptions options = {});

  VirtualClock clock;
  Harness harness;
  SoftwareRegistry software;
  std::unique_ptr<Engine> engine;
  std::unique_ptr<ControlHandler> control;

  /// Runs activations and advances virtual time until nothing is due
  /// before `until`. Returns the number of runs.
  int drain(Ticks until);
  /// Trace lines "op exit" of opEnd entries for `instance`, in order.
  std::vector<std::string> op_exits(const std::string& instance) const;
  /// Names of operations started by `instance`, in order.
  std::vector<std::string> op_starts(const std::string& instance) const;

 private:
  Rig(HarnessOptions options, bool);
  void load(const ArchitectureDecl& arch);
};

Event make_event(const std::string& type, const std::string& source, Ticks at);

/// A random valid megamodel (check_megamodel is empty).
Megamodel random_megamodel(std::mt19937_64& rng, int index);

/// A textual mutation of a fixture that must produce the diagnostic `code`.
struct Corruption {
  std::string name;
  std::string file;  // fixture-relative
  std::string find;
  std::string replace;
  std::string code;
};

std::vector<Corruption> corruption_corpus();
/// Applies the mutation and runs the full checks (architectures are checked
/// against the fixture megamodels, event types, and harness keys).
Diagnostics diagnose(const Corruption& c);
/// Pristine diagnostics of one fixture file, checked the same way.
Diagnostics diagnose_text(const std::string& file, const std::string& text);

/// runsSince(op -> exit) by a full scan: runs started after the most recent
/// run with a match, counting `current`; nullopt stands for "never".
std::optional<std::uint64_t> brute_runs_since(const ExecutionHistory& h, const RunRecord* current,
                                              const std::string& op, const std::string& exit);
/// executions(op[, exit]) by a full scan.
std::uint64_t brute_executions(const ExecutionHistory& h, const RunRecord* current, const std::string& op,
                               const std::string& exit = {});

/// Hand-coded model of the monolithic self-repair loop together with the
/// harness it repairs. Produces the "op exit" sequence of one run.
class SelfRepairOracle {
 public:
  void fail(const std::string& component, const std::string& kind) { failed_[component] = kind; }
  void heal(const std::string& component) { failed_.erase(component); }
  std::vector<std::string> run();
  const std::map<std::string, std::string>& failed() const { return failed_; }

 private:
  std::map<std::string, std::string> failed_;
  std::map<std::string, std::string> strategies_{{"crash", "restart"}, {"oom", "restart"}};
  std::uint64_t runs_ = 0;
  std::optional<std::uint64_t> last_clean_;
};

}  // namespace support

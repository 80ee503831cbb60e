#pragma once

// Timestamped scenario scripts that drive the harness and the control
// channel, and the driver loops that execute them.
//
//   # comment
//   at 2.5s inject c3 crash
//   at 30s load 0.9
//   at 1s emit RtException mRUBiS
//   at 4s request
//   every 50ms from 1s until 5s request
//   at 20s control patch fixtures/patches/add-strategies.patch
//
// Times take an `s` or `ms` suffix (a bare 0 is allowed).

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "megart/control.hpp"
#include "megart/engine.hpp"
#include "megart/harness.hpp"

namespace megart {

struct ScriptItem {
  enum class Kind { inject, load, emit, request, control };
  Kind kind = Kind::request;
  Ticks at = 0;
  Ticks every = 0;                // > 0: repeats
  std::optional<Ticks> until;     // repeating items only; inclusive
  std::vector<std::string> args;  // control: the whole command line
  int line = 0;
};

struct Script {
  std::vector<ScriptItem> items;
};

/// "2.5s", "100ms", "0". Returns nullopt on anything else.
std::optional<Ticks> parse_duration(std::string_view text);

Parsed<Script> parse_script(std::string_view text, const std::string& file = {});

class ScenarioRunner {
 public:
  ScenarioRunner(Engine& engine, Harness& harness, ControlHandler& control, Script script);

  /// Control responses, e.g. for logging.
  void on_control_response(std::function<void(Ticks, const std::string&, const std::string&)> fn) {
    on_response_ = std::move(fn);
  }

  /// Deterministic run on a virtual clock until `duration` (engine time) or
  /// a stop command. Script items are released as the clock passes them and
  /// reach the engine through its inbox.
  void run_virtual(VirtualClock& clock, Ticks duration);
  /// Wall-clock run; script items are released by a timer thread.
  void run_realtime(Ticks duration);

  /// Time of the next unreleased occurrence, if any.
  std::optional<Ticks> next_release() const;

 private:
  struct Cursor {
    std::size_t item;
    Ticks next;
  };
  /// Posts every occurrence due at or before `t`.
  void release_until(Ticks t);
  void post(const ScriptItem& item, Ticks at);

  Engine& engine_;
  Harness& harness_;
  ControlHandler& control_;
  Script script_;
  std::vector<Cursor> cursors_;
  Ticks horizon_ = 0;
  std::function<void(Ticks, const std::string&, const std::string&)> on_response_;
};

}  // namespace megart

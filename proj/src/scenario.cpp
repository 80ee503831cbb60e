#include "megart/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <condition_variable>
#include <mutex>
#include <sstream>
#include <thread>

namespace megart {

std::optional<Ticks> parse_duration(std::string_view text) {
  if (text == "0") return 0;
  Ticks scale = 0;
  if (text.size() > 2 && text.substr(text.size() - 2) == "ms") {
    scale = kTicksPerMilli;
    text.remove_suffix(2);
  } else if (text.size() > 1 && text.back() == 's') {
    scale = kTicksPerSecond;
    text.remove_suffix(1);
  } else {
    return std::nullopt;
  }
  if (text.empty() || text.find_first_not_of("0123456789.") != std::string_view::npos) return std::nullopt;
  double v = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size()) return std::nullopt;
  return static_cast<Ticks>(std::llround(v * static_cast<double>(scale)));
}

namespace {

Diagnostic script_error(const std::string& file, int line, const std::string& msg) {
  return Diagnostic{Severity::error, "E-SCRIPT", msg, SourceSpan{file, line, 1, line, 1}, {}};
}

}  // namespace

Parsed<Script> parse_script(std::string_view text, const std::string& file) {
  Parsed<Script> out;
  Script s;
  std::istringstream in{std::string(text)};
  int lineno = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++lineno;
    std::string line = raw.substr(0, raw.find('#'));
    std::istringstream ls(line);
    std::vector<std::string> w;
    for (std::string x; ls >> x;) w.push_back(x);
    if (w.empty()) continue;
    auto err = [&](const std::string& m) { out.diagnostics.push_back(script_error(file, lineno, m)); };

    ScriptItem item;
    item.line = lineno;
    std::size_t i = 0;
    if (w[0] == "at") {
      auto t = w.size() > 1 ? parse_duration(w[1]) : std::nullopt;
      if (!t) {
        err("expected 'at <time>'");
        continue;
      }
      item.at = *t;
      i = 2;
    } else if (w[0] == "every") {
      auto dt = w.size() > 1 ? parse_duration(w[1]) : std::nullopt;
      if (!dt || *dt <= 0) {
        err("expected 'every <positive duration>'");
        continue;
      }
      item.every = *dt;
      i = 2;
      bool bad = false;
      while (i + 1 < w.size() && (w[i] == "from" || w[i] == "until")) {
        auto t = parse_duration(w[i + 1]);
        if (!t) {
          bad = true;
          break;
        }
        (w[i] == "from" ? item.at : item.until.emplace()) = *t;
        i += 2;
      }
      if (bad) {
        err("bad 'from'/'until' time");
        continue;
      }
    } else {
      err("line must start with 'at' or 'every'");
      continue;
    }
    if (i >= w.size()) {
      err("missing command");
      continue;
    }
    const std::string& cmd = w[i];
    std::vector<std::string> args(w.begin() + static_cast<long>(i) + 1, w.end());
    if (cmd == "inject" && args.size() == 2) {
      item.kind = ScriptItem::Kind::inject;
    } else if (cmd == "load" && args.size() == 1) {
      item.kind = ScriptItem::Kind::load;
    } else if (cmd == "emit" && (args.size() == 1 || args.size() == 2)) {
      item.kind = ScriptItem::Kind::emit;
    } else if (cmd == "request" && args.empty()) {
      item.kind = ScriptItem::Kind::request;
    } else if (cmd == "control" && !args.empty()) {
      item.kind = ScriptItem::Kind::control;
      std::string rest;
      for (const std::string& a : args) rest += (rest.empty() ? "" : " ") + a;
      args = {rest};
    } else {
      err("unknown or malformed command '" + cmd + "'");
      continue;
    }
    item.args = std::move(args);
    s.items.push_back(std::move(item));
  }
  if (out.diagnostics.empty()) out.value = std::move(s);
  return out;
}

ScenarioRunner::ScenarioRunner(Engine& engine, Harness& harness, ControlHandler& control, Script script)
    : engine_(engine), harness_(harness), control_(control), script_(std::move(script)) {
  for (std::size_t i = 0; i < script_.items.size(); ++i) cursors_.push_back(Cursor{i, script_.items[i].at});
  // Stable order of simultaneous items: script order.
  std::stable_sort(cursors_.begin(), cursors_.end(), [](const Cursor& a, const Cursor& b) { return a.next < b.next; });
}

std::optional<Ticks> ScenarioRunner::next_release() const {
  std::optional<Ticks> out;
  for (const Cursor& c : cursors_)
    if (c.next <= horizon_ && (!out || c.next < *out)) out = c.next;
  return out;
}

void ScenarioRunner::post(const ScriptItem& item, Ticks at) {
  switch (item.kind) {
    case ScriptItem::Kind::emit: {
      Event e;
      e.type = item.args[0];
      e.source = item.args.size() > 1 ? item.args[1] : harness_.options().source;
      e.timestamp = at;
      engine_.post_event(std::move(e));
      return;
    }
    case ScriptItem::Kind::inject:
    case ScriptItem::Kind::load:
    case ScriptItem::Kind::request:
    case ScriptItem::Kind::control: {
      std::string line;
      if (item.kind == ScriptItem::Kind::inject) line = "inject " + item.args[0] + " " + item.args[1];
      if (item.kind == ScriptItem::Kind::load) line = "load " + item.args[0];
      if (item.kind == ScriptItem::Kind::request) line = "request";
      if (item.kind == ScriptItem::Kind::control) line = item.args[0];
      bool report = item.kind == ScriptItem::Kind::control;
      engine_.post([this, line, at, report](Engine& e) {
        std::string resp = control_.execute(line, at);
        if (on_response_ && (report || resp.rfind("error", 0) == 0)) on_response_(e.now(), line, resp);
      });
      return;
    }
  }
}

void ScenarioRunner::release_until(Ticks t) {
  for (;;) {
    auto it = std::min_element(cursors_.begin(), cursors_.end(), [](const Cursor& a, const Cursor& b) {
      return a.next != b.next ? a.next < b.next : a.item < b.item;
    });
    if (it == cursors_.end() || it->next > t || it->next > horizon_) return;
    const ScriptItem& item = script_.items[it->item];
    post(item, it->next);
    Ticks limit = item.until.value_or(horizon_);
    if (item.every > 0 && it->next + item.every <= limit) {
      it->next += item.every;
    } else {
      cursors_.erase(it);
    }
  }
}

void ScenarioRunner::run_virtual(VirtualClock& clock, Ticks duration) {
  horizon_ = duration;
  clock.set_observer([this](Ticks) { release_until(engine_.now()); });
  release_until(engine_.now());
  while (!engine_.stopped()) {
    engine_.process_inbox();
    if (engine_.stopped()) break;
    if (auto a = engine_.next_action()) {
      engine_.run_activation(*a);
      continue;
    }
    std::optional<Ticks> t = next_release();
    if (auto w = engine_.next_wakeup(); w && (!t || *w < *t)) t = w;
    if (!t || *t > duration) break;
    if (*t <= engine_.now()) {
      // Nothing runnable although something is due: only possible for
      // activations of instances that no longer exist.
      break;
    }
    clock.advance_to(clock.now() + (*t - engine_.now()));
  }
  engine_.process_inbox();
  clock.set_observer({});
}

void ScenarioRunner::run_realtime(Ticks duration) {
  horizon_ = duration;
  std::mutex mu;
  std::condition_variable cv;
  bool quit = false;
  std::thread timer([&] {
    std::unique_lock lk(mu);
    for (;;) {
      release_until(engine_.now());
      std::optional<Ticks> t = next_release();
      Ticks until = t ? std::min(*t, duration) : duration;
      if (engine_.now() >= duration) {
        engine_.stop();
        return;
      }
      cv.wait_for(lk, std::chrono::microseconds(std::max<Ticks>(until - engine_.now(), 100)), [&] { return quit; });
      if (quit) return;
    }
  });
  engine_.run_realtime();
  {
    std::lock_guard lk(mu);
    quit = true;
  }
  cv.notify_all();
  timer.join();
}

}  // namespace megart

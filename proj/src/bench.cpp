#include "megart/bench.hpp"

#include <time.h>

#include <algorithm>
#include <cstdio>
#include <memory>

#include "megart/clock.hpp"
#include "megart/dsl.hpp"
#include "megart/engine.hpp"

namespace megart {

namespace {

Ticks cpu_now(clockid_t id) {
  timespec ts{};
  clock_gettime(id, &ts);
  return static_cast<Ticks>(ts.tv_sec) * kTicksPerSecond + ts.tv_nsec / 1000;
}

/// Busy-waits until this thread has consumed `d` of CPU time.
void spin(Ticks d) {
  if (d <= 0) return;
  const Ticks until = cpu_now(CLOCK_THREAD_CPUTIME_ID) + d;
  while (cpu_now(CLOCK_THREAD_CPUTIME_ID) < until) {
  }
}

/// The five mocks. Each reads its input models and returns a fixed exit.
struct Mocks {
  Ticks compute = 0;
  std::string current;  // ops of the run in progress
  std::size_t touched = 0;

  std::string call(const std::string& name, const std::string& exit, std::initializer_list<const Json*> models) {
    for (const Json* m : models) touched += m->size();
    spin(compute);
    if (!current.empty()) current += ",";
    current += name;
    return exit;
  }
};

BenchRow make_row(int compute_ms, int period_ms, std::string mode) {
  BenchRow r;
  r.compute_ms = compute_ms;
  r.period_ms = period_ms;
  r.mode = std::move(mode);
  return r;
}

Json model_body(const std::string& slot) { return Json{{"slot", slot}, {"entries", Json::array({1, 2, 3})}}; }

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

/// Measured totals of one mode, possibly over several slices.
struct Tally {
  Ticks wall = 0;
  Ticks cpu = 0;
  std::uint64_t runs = 0;
  std::vector<double> run_ms;

  void into(BenchRow& row) const {
    row.runs = runs;
    row.wall_seconds = to_seconds(wall);
    row.mean_cpu_pct = wall > 0 ? 100.0 * static_cast<double>(cpu) / static_cast<double>(wall) : 0;
    row.median_run_ms = median(run_ms);
  }
};

// Each slice starts where a run starts and stops where a gate opens, so it
// covers whole run+period cycles.
class Session {
 public:
  virtual ~Session() = default;
  void slice(Ticks duration, Tally& tally) {
    const Ticks wall0 = clock_.now(), cpu0 = cpu_now(CLOCK_PROCESS_CPUTIME_ID);
    const Ticks end = wall0 + duration;
    while (true) {
      Ticks gate = next_gate();
      if (gate > clock_.now()) {
        clock_.sleep_for(gate - clock_.now());
        continue;
      }
      if (clock_.now() >= end) break;
      Ticks t0 = clock_.now();
      run_once();
      tally.run_ms.push_back(static_cast<double>(clock_.now() - t0) / kTicksPerMilli);
      ++tally.runs;
    }
    tally.wall += clock_.now() - wall0;
    tally.cpu += cpu_now(CLOCK_PROCESS_CPUTIME_ID) - cpu0;
  }
  /// Waits until a run may start.
  void align() {
    if (Ticks gate = next_gate(); gate > clock_.now()) clock_.sleep_for(gate - clock_.now());
  }
  std::vector<std::string> run_ops;

 protected:
  virtual Ticks next_gate() = 0;
  virtual void run_once() = 0;
  SteadyClock clock_;
};

class InterpreterSession : public Session {
 public:
  InterpreterSession(const BenchConfig& cfg, int compute_ms, int period_ms)
      : mocks_{compute_ms * kTicksPerMilli, {}, 0}, engine_(clock_, reg_) {
    reg_.add("bench.system", [](OperationContext&) { return std::string("done"); });
    reg_.add("bench.update", [this](OperationContext& c) {
      return mocks_.call("update", "done", {&c.model("TGGRules").body, &c.model("ArchitecturalModel").body});
    });
    reg_.add("bench.check", [this](OperationContext& c) {
      return mocks_.call("check", "failures",
                         {&c.model("FailureAnalysisRules").body, &c.model("ArchitecturalModel").body});
    });
    reg_.add("bench.deep", [this](OperationContext& c) {
      return mocks_.call("deep", "done", {&c.model("FailureAnalysisRules").body, &c.model("ArchitecturalModel").body});
    });
    reg_.add("bench.repair", [this](OperationContext& c) {
      return mocks_.call("repair", "planned", {&c.model("RepairStrategies").body, &c.model("ArchitecturalModel").body});
    });
    reg_.add("bench.effect", [this](OperationContext& c) {
      return mocks_.call("effect", "done", {&c.model("TGGRules").body, &c.model("ArchitecturalModel").body});
    });
    engine_.set_trace_enabled(false);
    engine_.set_run_logging(false);
    engine_.set_model_initializer([](const std::string&, const ModelSlot& s) { return model_body(s.name); });
    engine_.add_megamodel(cfg.megamodel);
    char trigger[64];
    std::snprintf(trigger, sizeof trigger, "; %dms; Monitor", period_ms);
    std::string ld = std::string("architecture \"Bench\" {\n") +
                     "  layer 0 \"Layer-0\" { software system : \"bench.system\" }\n"
                     "  layer 1 \"Layer-1\" { module loop : " + quote(cfg.megamodel.name) + " }\n"
                     "  sense loop <- system [r] trigger " + quote(trigger) + "\n"
                     "  effect loop -> system [w]\n"
                     "  use loop.Update -> \"bench.update\"\n"
                     "  use loop.CheckForFailures -> \"bench.check\"\n"
                     "  use loop.DeepCheck -> \"bench.deep\"\n"
                     "  use loop.Repair -> \"bench.repair\"\n"
                     "  use loop.Effect -> \"bench.effect\"\n"
                     "}\n";
    Parsed<ArchitectureDecl> arch = parse_ld(ld, "bench.ld");
    if (!arch) throw EngineError("E-BENCH", format_diagnostic(arch.diagnostics.front()));
    Diagnostics d = engine_.load_architecture(std::move(*arch));
    if (has_errors(d)) throw EngineError("E-BENCH", format_diagnostic(d.front()));
    for (int i = 0; i < cfg.warmup_runs; ++i) {
      mocks_.current.clear();
      engine_.execute_run("loop", "Monitor");
      run_ops.push_back(mocks_.current);
    }
  }

 protected:
  Ticks next_gate() override { return engine_.next_wakeup().value_or(clock_.now()); }
  void run_once() override {
    std::optional<Activation> a = engine_.next_action();
    if (!a) throw EngineError("E-BENCH", "no activation at an open gate");
    mocks_.current.clear();
    engine_.run_activation(*a);
    run_ops.push_back(mocks_.current);
  }

 private:
  Mocks mocks_;
  SoftwareRegistry reg_;
  Engine engine_;
};

class BaselineSession : public Session {
 public:
  BaselineSession(const BenchConfig& cfg, int compute_ms, int period_ms)
      : mocks_{compute_ms * kTicksPerMilli, {}, 0}, period_(period_ms * kTicksPerMilli) {
    for (int i = 0; i < cfg.warmup_runs; ++i) loop_once();
    gate_ = clock_.now();
  }

 protected:
  Ticks next_gate() override { return gate_; }
  void run_once() override {
    loop_once();
    gate_ = clock_.now() + period_;
  }

 private:
  // The same pre-filled models the interpreter hands to the mocks.
  void loop_once() {
    ++run_;
    mocks_.current.clear();
    mocks_.call("update", "done", {&tgg_, &am_});
    if (mocks_.call("check", "failures", {&far_, &am_}) == "failures") {
      if (run_ > 5) mocks_.call("deep", "done", {&far_, &am_});
      mocks_.call("repair", "planned", {&rs_, &am_});
      mocks_.call("effect", "done", {&tgg_, &am_});
    }
    run_ops.push_back(mocks_.current);
  }

  Mocks mocks_;
  Ticks period_;
  Ticks gate_ = 0;
  std::uint64_t run_ = 0;
  const Json tgg_ = model_body("TGGRules"), am_ = model_body("ArchitecturalModel"),
             far_ = model_body("FailureAnalysisRules"), rs_ = model_body("RepairStrategies");
};

std::unique_ptr<Session> open_session(const BenchConfig& cfg, int compute_ms, int period_ms, const std::string& mode) {
  if (mode == "interpreter") return std::make_unique<InterpreterSession>(cfg, compute_ms, period_ms);
  if (mode == "baseline") return std::make_unique<BaselineSession>(cfg, compute_ms, period_ms);
  throw EngineError("E-BENCH", "unknown mode '" + mode + "'");
}

BenchRow finish(Session& s, const Tally& t, int compute_ms, int period_ms, const std::string& mode) {
  BenchRow row = make_row(compute_ms, period_ms, mode);
  t.into(row);
  row.run_ops = std::move(s.run_ops);
  return row;
}

void check_feasible(int compute_ms, int period_ms) {
  if (bench_infeasible(compute_ms, period_ms))
    throw EngineError("E-BENCH-INFEASIBLE", "5 x " + std::to_string(compute_ms) + "ms exceeds the " +
                                                std::to_string(period_ms) + "ms period");
}

}  // namespace

std::string BenchRow::combo() const {
  return "c" + std::to_string(compute_ms) + "ms-p" + std::to_string(period_ms) + "ms";
}

bool bench_infeasible(int compute_ms, int period_ms) { return 5 * compute_ms > period_ms; }

BenchRow run_bench_mode(const BenchConfig& cfg, int compute_ms, int period_ms, const std::string& mode) {
  check_feasible(compute_ms, period_ms);
  std::unique_ptr<Session> s = open_session(cfg, compute_ms, period_ms, mode);
  Tally t;
  s->align();
  s->slice(from_seconds(cfg.seconds_per_mode), t);
  return finish(*s, t, compute_ms, period_ms, mode);
}

BenchReport run_benchmark(const BenchConfig& cfg, const std::function<void(const BenchRow&)>& progress) {
  BenchReport report;
  for (int c : cfg.compute_ms) {
    for (int p : cfg.period_ms) {
      if (bench_infeasible(c, p)) {
        BenchRow r = make_row(c, p, "infeasible");
        if (progress) progress(r);
        report.rows.push_back(std::move(r));
        continue;
      }
      // Alternating slices spread slow stretches of the host over both modes.
      std::unique_ptr<Session> in = open_session(cfg, c, p, "interpreter");
      std::unique_ptr<Session> bl = open_session(cfg, c, p, "baseline");
      Tally ti, tb;
      const int slices = std::max(1, cfg.slices);
      const Ticks each = from_seconds(cfg.seconds_per_mode / slices);
      for (int k = 0; k < slices; ++k) {
        in->align();
        in->slice(each, ti);
        bl->align();
        bl->slice(each, tb);
      }
      BenchRow interp = finish(*in, ti, c, p, "interpreter");
      BenchRow base = finish(*bl, tb, c, p, "baseline");
      interp.overhead_pp = base.overhead_pp = interp.mean_cpu_pct - base.mean_cpu_pct;
      if (progress) {
        progress(interp);
        progress(base);
      }
      report.rows.push_back(std::move(interp));
      report.rows.push_back(std::move(base));
    }
  }
  return report;
}

std::string BenchReport::to_csv() const {
  std::string out = "combo,mode,runs,mean_cpu_pct,median_run_ms,overhead_pp\n";
  char buf[256];
  for (const BenchRow& r : rows) {
    if (r.mode == "infeasible") {
      out += r.combo() + ",infeasible,0,,,\n";
      continue;
    }
    std::snprintf(buf, sizeof buf, "%s,%s,%llu,%.4f,%.4f,%.4f\n", r.combo().c_str(), r.mode.c_str(),
                  static_cast<unsigned long long>(r.runs), r.mean_cpu_pct, r.median_run_ms, r.overhead_pp);
    out += buf;
  }
  return out;
}

const BenchRow* BenchReport::find(int compute_ms, int period_ms, const std::string& mode) const {
  for (const BenchRow& r : rows)
    if (r.compute_ms == compute_ms && r.period_ms == period_ms && r.mode == mode) return &r;
  return nullptr;
}

}  // namespace megart

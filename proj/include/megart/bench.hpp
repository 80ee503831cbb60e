#pragma once

// Interpreter overhead benchmark: the monolithic self-repair loop executed
// by the engine versus the same five mock operations called in a fixed
// sequence, on a wall clock, with the period anchored on the end of the
// previous run.

#include <functional>
#include <string>
#include <vector>

#include "megart/metamodel.hpp"

namespace megart {

struct BenchConfig {
  Megamodel megamodel;  // monolithic self-repair
  std::vector<int> compute_ms{0, 5, 10, 20};
  std::vector<int> period_ms{15, 30, 60, 120, 240, 480, 960};
  double seconds_per_mode = 10.0;
  int slices = 5;       // the sweep alternates the two modes this many times per combo
  int warmup_runs = 6;  // back-to-back, unmeasured; the sixth run onward takes the deep check
};

struct BenchRow {
  int compute_ms = 0;
  int period_ms = 0;
  std::string mode;  // interpreter, baseline, or infeasible
  std::uint64_t runs = 0;
  double wall_seconds = 0;
  double mean_cpu_pct = 0;
  double median_run_ms = 0;
  double overhead_pp = 0;  // interpreter minus baseline mean CPU, same combo
  /// Operation keys per run (warm-up included), e.g. "update,check,deep,repair,effect".
  std::vector<std::string> run_ops;

  std::string combo() const;
};

struct BenchReport {
  std::vector<BenchRow> rows;

  /// combo,mode,runs,mean_cpu_pct,median_run_ms,overhead_pp
  std::string to_csv() const;
  const BenchRow* find(int compute_ms, int period_ms, const std::string& mode) const;
};

/// True when five operations of `compute_ms` cannot fit in one period.
bool bench_infeasible(int compute_ms, int period_ms);

/// One mode of one combo.
BenchRow run_bench_mode(const BenchConfig& cfg, int compute_ms, int period_ms, const std::string& mode);

/// Every combo, both modes, sequentially. `progress` sees each row.
BenchReport run_benchmark(const BenchConfig& cfg, const std::function<void(const BenchRow&)>& progress = {});

}  // namespace megart

// megart: validate diagrams, run scenarios, and run the overhead benchmark.
//
// Exit codes: 0 ok, 1 validation error, 2 runtime error, 3 control-protocol
// error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "megart/bench.hpp"
#include "megart/control.hpp"
#include "megart/dsl.hpp"
#include "megart/harness.hpp"
#include "megart/patch.hpp"
#include "megart/scenario.hpp"
#include "megart/snapshot.hpp"
#include "megart/workspace.hpp"

namespace fs = std::filesystem;
using namespace megart;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;
constexpr int kProtocol = 3;

void print(const Diagnostics& diags) {
  for (const Diagnostic& d : diags) std::cerr << format_diagnostic(d) << "\n";
}

std::vector<int> int_list(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  for (std::string x; std::getline(ss, x, ',');)
    if (!x.empty()) out.push_back(std::stoi(x));
  return out;
}

int cmd_validate(const std::vector<std::string>& files, const std::string& fld_dir, const std::string& events) {
  Diagnostics all;
  MegamodelRegistry reg;
  EventTypeRegistry types = Harness::default_event_types();
  try {
    if (!fld_dir.empty()) {
      Diagnostics d = load_fld_dir(fld_dir, reg);
      all.insert(all.end(), d.begin(), d.end());
    }
    if (!events.empty()) {
      Parsed<EventTypeRegistry> t = parse_event_types(read_file(events), events);
      all.insert(all.end(), t.diagnostics.begin(), t.diagnostics.end());
      if (t) types = std::move(*t);
    }
    // Megamodels first so that architectures can be checked against them.
    std::vector<std::string> ordered = files;
    std::stable_partition(ordered.begin(), ordered.end(),
                          [](const std::string& f) { return fs::path(f).extension() == ".fld"; });
    for (const std::string& f : ordered) {
      std::string ext = fs::path(f).extension().string();
      std::string text = read_file(f);
      Diagnostics d;
      if (ext == ".fld") {
        Parsed<Megamodel> m = parse_fld(text, f);
        d = m.diagnostics;
        if (m) reg.insert_or_assign(m->name, std::move(*m));
      } else if (ext == ".ld") {
        Parsed<ArchitectureDecl> a = parse_ld(text, f);
        d = a.diagnostics;
        if (a && !reg.empty()) {
          Harness h;
          SoftwareRegistry sw;
          h.register_operations(sw);
          std::set<std::string, std::less<>> keys = sw.keys();
          Diagnostics full = check_architecture(*a, ArchitectureContext{&reg, &types, &keys});
          for (Diagnostic& x : full) {
            auto it = a->spans.find(x.path);
            if (x.span.file.empty()) x.span = it != a->spans.end() ? it->second : a->spans["architecture"];
          }
          d.insert(d.end(), full.begin(), full.end());
        }
      } else if (ext == ".patch") {
        d = parse_patch(text, f).diagnostics;
      } else if (ext == ".events") {
        d = parse_event_types(text, f).diagnostics;
      } else if (ext == ".script") {
        d = parse_script(text, f).diagnostics;
      } else if (ext == ".json") {
        VirtualClock clock;
        Harness h;
        SoftwareRegistry sw;
        h.register_operations(sw);
        Engine e(clock, sw);
        try {
          import_snapshot(e, text);
        } catch (const EngineError& x) {
          d.push_back(Diagnostic{Severity::error, x.code(), x.what(), SourceSpan{f}, {}});
        }
      } else {
        d.push_back(Diagnostic{Severity::error, "E-IO", "unknown file type '" + ext + "'", SourceSpan{f}, {}});
      }
      if (d.empty()) std::cout << f << ": ok\n";
      all.insert(all.end(), d.begin(), d.end());
    }
  } catch (const EngineError& e) {
    std::cerr << e.what() << "\n";
    return kInvalid;
  }
  print(all);
  return has_errors(all) ? kInvalid : kOk;
}

struct RunArgs {
  std::string ld;
  std::string fld_dir;
  std::string events;
  std::string script;
  std::string trace_file;
  std::string import;
  std::string export_path;
  std::string duration = "60s";
  bool virtual_clock = false;
};

int cmd_run(const RunArgs& args) {
  auto duration = parse_duration(args.duration);
  if (!duration) {
    std::cerr << "bad --duration '" << args.duration << "'\n";
    return kInvalid;
  }
  Script script;
  if (!args.script.empty()) {
    Parsed<Script> s = parse_script(read_file(args.script), args.script);
    if (!s) {
      print(s.diagnostics);
      return kInvalid;
    }
    script = std::move(*s);
  }

  std::ofstream trace_out;
  std::ostream* out = &std::cout;
  if (!args.trace_file.empty()) {
    trace_out.open(args.trace_file, std::ios::trunc);
    if (!trace_out) {
      std::cerr << "cannot write '" << args.trace_file << "'\n";
      return kRuntime;
    }
    out = &trace_out;
  }

  VirtualClock vclock;
  SteadyClock sclock;
  Clock& clock = args.virtual_clock ? static_cast<Clock&>(vclock) : static_cast<Clock&>(sclock);
  Harness harness;
  SoftwareRegistry sw;
  harness.register_operations(sw);
  Engine engine(clock, sw);
  engine.set_event_types(Harness::default_event_types());
  engine.set_model_initializer(harness.initializer());
  try {
    if (!args.import.empty()) {
      import_snapshot(engine, read_file(args.import));
    } else {
      if (args.ld.empty() || args.fld_dir.empty()) {
        std::cerr << "run needs a layer diagram and --fld-dir (or --import)\n";
        return kInvalid;
      }
      Diagnostics d = load_into(engine, LoadOptions{args.fld_dir, args.events, args.ld});
      print(d);
      if (has_errors(d)) return kInvalid;
    }
  } catch (const EngineError& e) {
    std::cerr << e.what() << "\n";
    return e.code() == "E-IO" || e.code() == "E-SNAP-PARSE" ? kInvalid : kRuntime;
  }

  engine.set_trace_enabled(true);
  engine.set_trace_sink([out](const TraceEntry& t) { *out << format_trace(t) << "\n"; });
  ControlHandler control(engine, &harness);
  ScenarioRunner runner(engine, harness, control, std::move(script));
  runner.on_control_response([](Ticks t, const std::string& line, const std::string& resp) {
    std::cerr << "# " << to_seconds(t) << " control " << line << "\n" << resp << "\n";
  });

  int status = kOk;
  try {
    if (args.virtual_clock) {
      runner.run_virtual(vclock, *duration);
    } else {
      const char* addr = std::getenv("ENGINE_CONTROL_ADDR");
      ControlServer server(engine, control, addr ? addr : "");
      if (!server.error().empty()) {
        std::cerr << server.error() << "\n";
        return kProtocol;
      }
      runner.run_realtime(*duration);
      server.shutdown();
    }
    if (!args.export_path.empty()) write_file(args.export_path, export_snapshot_text(engine));
  } catch (const EngineError& e) {
    std::cerr << e.what() << "\n";
    status = kRuntime;
  }
  out->flush();
  std::cerr << "# runs " << engine.run_log().size() << " aborted " << engine.aborted_runs() << "\n";
  return status;
}

struct BenchArgs {
  std::string fld;
  std::string csv;
  std::string compute = "0,5,10,20";
  std::string period = "15,30,60,120,240,480,960";
  double seconds = 10.0;
};

int cmd_bench(const BenchArgs& args) {
  BenchConfig cfg;
  try {
    Parsed<Megamodel> m = parse_fld(read_file(args.fld), args.fld);
    if (!m) {
      print(m.diagnostics);
      return kInvalid;
    }
    cfg.megamodel = std::move(*m);
    cfg.compute_ms = int_list(args.compute);
    cfg.period_ms = int_list(args.period);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kInvalid;
  }
  cfg.seconds_per_mode = args.seconds;
  try {
    BenchReport report = run_benchmark(cfg, [](const BenchRow& r) {
      std::cerr << r.combo() << " " << r.mode;
      if (r.mode != "infeasible") std::cerr << " runs=" << r.runs << " cpu=" << r.mean_cpu_pct << "%";
      std::cerr << "\n";
    });
    std::string csv = report.to_csv();
    if (args.csv.empty()) {
      std::cout << csv;
    } else {
      write_file(args.csv, csv);
    }
  } catch (const EngineError& e) {
    std::cerr << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interpreter for executable feedback-loop megamodels"};
  app.require_subcommand(1);

  std::vector<std::string> files;
  std::string v_fld_dir, v_events;
  CLI::App* validate = app.add_subcommand("validate", "Parse and check .fld/.ld/.patch/.events/.script/.json files");
  validate->add_option("files", files, "Files to check")->required();
  validate->add_option("--fld-dir", v_fld_dir, "Megamodels to check layer diagrams against");
  validate->add_option("--events", v_events, "Event type declarations");

  RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "Load a layer diagram and execute a scenario");
  run->add_option("ld", run_args.ld, "Layer diagram (.ld)");
  run->add_option("--fld-dir", run_args.fld_dir, "Directory of .fld files");
  run->add_option("--events", run_args.events, "Event type declarations");
  run->add_option("--script", run_args.script, "Scenario script");
  run->add_option("--duration", run_args.duration, "Engine time to run, e.g. 60s");
  run->add_flag("--virtual-clock", run_args.virtual_clock, "Deterministic virtual time");
  run->add_option("--trace-file", run_args.trace_file, "Write the trace here instead of stdout");
  run->add_option("--import", run_args.import, "Start from a snapshot instead of a layer diagram");
  run->add_option("--export", run_args.export_path, "Write a snapshot when the run ends");

  BenchArgs bench_args;
  CLI::App* bench = app.add_subcommand("bench", "Interpreter overhead versus a hard-coded loop");
  bench->add_option("--fld", bench_args.fld, "Monolithic self-repair megamodel")->required();
  bench->add_option("--csv", bench_args.csv, "Write the CSV report here instead of stdout");
  bench->add_option("--compute", bench_args.compute, "Per-operation compute times in ms, comma separated");
  bench->add_option("--period", bench_args.period, "Periods in ms, comma separated");
  bench->add_option("--seconds", bench_args.seconds, "Measured seconds per mode and combo");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    if (*validate) return cmd_validate(files, v_fld_dir, v_events);
    if (*run) return cmd_run(run_args);
    if (*bench) return cmd_bench(bench_args);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kRuntime;
  }
  return kInvalid;
}

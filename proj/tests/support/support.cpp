#include "support.hpp"

#include <algorithm>
#include <filesystem>
#include <stdexcept>

#include "megart/dsl.hpp"
#include "megart/workspace.hpp"

namespace fs = std::filesystem;

namespace support {

std::string fixture_path(const std::string& rel) { return (fs::path(FIXTURE_DIR) / rel).string(); }

std::string fixture_text(const std::string& rel) { return read_file(fixture_path(rel)); }

Megamodel fixture_fld(const std::string& rel) {
  Parsed<Megamodel> m = parse_fld(fixture_text(rel), rel);
  if (!m) throw std::runtime_error(rel + ": " + format_diagnostic(m.diagnostics.front()));
  return std::move(*m);
}

ArchitectureDecl fixture_ld(const std::string& rel) {
  Parsed<ArchitectureDecl> a = parse_ld(fixture_text(rel), rel);
  if (!a) throw std::runtime_error(rel + ": " + format_diagnostic(a.diagnostics.front()));
  return std::move(*a);
}

MegamodelRegistry fixture_registry() {
  MegamodelRegistry reg;
  Diagnostics d = load_fld_dir(fixture_path("fld"), reg);
  if (has_errors(d)) throw std::runtime_error(format_diagnostic(d.front()));
  return reg;
}

std::vector<std::string> corpus_files(const std::string& subdir, const std::string& ext) {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(fixture_path(subdir)))
    if (e.path().extension() == ext) out.push_back(subdir + "/" + e.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------

Rig::Rig(HarnessOptions options, bool) : harness(std::move(options)) {
  harness.register_operations(software);
  engine = std::make_unique<Engine>(clock, software);
  engine->set_event_types(Harness::default_event_types());
  engine->set_model_initializer(harness.initializer());
  control = std::make_unique<ControlHandler>(*engine, &harness);
}

Rig::Rig(const std::string& ld_rel, HarnessOptions options) : Rig(std::move(options), true) {
  load(fixture_ld(ld_rel));
}

std::unique_ptr<Rig> Rig::from_text(const std::string& ld_text, HarnessOptions options) {
  std::unique_ptr<Rig> r(new Rig(std::move(options), true));
  Parsed<ArchitectureDecl> a = parse_ld(ld_text, "inline.ld");
  if (!a) throw std::runtime_error(format_diagnostic(a.diagnostics.front()));
  r->load(*a);
  return r;
}

void Rig::load(const ArchitectureDecl& arch) {
  for (auto& [name, m] : fixture_registry()) engine->add_megamodel(m);
  Diagnostics d = engine->load_architecture(arch);
  if (has_errors(d)) throw std::runtime_error(format_diagnostic(d.front()));
}

int Rig::drain(Ticks until) {
  int runs = 0;
  for (;;) {
    engine->process_inbox();
    if (std::optional<Activation> a = engine->next_action()) {
      engine->run_activation(*a);
      ++runs;
      continue;
    }
    std::optional<Ticks> w = engine->next_wakeup();
    if (!w || *w > until || *w <= clock.now()) break;
    clock.advance_to(*w);
  }
  return runs;
}

std::vector<std::string> Rig::op_exits(const std::string& instance) const {
  std::vector<std::string> out;
  for (const TraceEntry& t : engine->trace_log())
    if (t.instance == instance && t.kind == TraceKind::op_end) out.push_back(t.name + " " + t.detail);
  return out;
}

std::vector<std::string> Rig::op_starts(const std::string& instance) const {
  std::vector<std::string> out;
  for (const TraceEntry& t : engine->trace_log())
    if (t.instance == instance && t.kind == TraceKind::op_start) out.push_back(t.name);
  return out;
}

Event make_event(const std::string& type, const std::string& source, Ticks at) {
  Event e;
  e.type = type;
  e.source = source;
  e.timestamp = at;
  return e;
}

// ---------------------------------------------------------------------------
// Random megamodels

namespace {

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& v) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

int uniform(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
bool coin(std::mt19937_64& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

std::string random_condition(std::mt19937_64& rng, const Megamodel& m, int depth) {
  if (depth > 0 && coin(rng, 0.4)) {
    int k = uniform(rng, 0, 2);
    if (k == 0) return "not (" + random_condition(rng, m, depth - 1) + ")";
    return "(" + random_condition(rng, m, depth - 1) + (k == 1 ? " and " : " or ") +
           random_condition(rng, m, depth - 1) + ")";
  }
  const Operation& op = pick(rng, m.operations);
  std::string ref = op.name;
  if (coin(rng)) ref += " -> " + pick(rng, op.exits);
  std::string atom;
  switch (uniform(rng, 0, 3)) {
    case 0: atom = "executions(" + ref + ")"; break;
    case 1: atom = "runsSince(" + op.name + " -> " + pick(rng, op.exits) + ")"; break;
    case 2: atom = "secondsSince(" + ref + ")"; break;
    default: atom = "runCount()"; break;
  }
  static const std::vector<std::string> cmp{"<", "<=", "==", "!=", ">=", ">"};
  std::string lit = coin(rng, 0.8) ? std::to_string(uniform(rng, 0, 20)) : std::to_string(uniform(rng, 0, 9)) + ".5";
  return atom + " " + pick(rng, cmp) + " " + lit;
}

}  // namespace

Megamodel random_megamodel(std::mt19937_64& rng, int index) {
  static const std::vector<ModelStereotype> kinds{
      ModelStereotype::none,            ModelStereotype::MonitoringModel, ModelStereotype::ExecutionModel,
      ModelStereotype::CausalConnectionModel, ModelStereotype::ReflectionModel, ModelStereotype::EvaluationModel,
      ModelStereotype::ChangeModel,     ModelStereotype::AdaptationModel};
  static const std::vector<Activity> activities{Activity::none, Activity::Monitor, Activity::Analyze, Activity::Plan,
                                                Activity::Execute};
  static const std::vector<UsageKind> usages{UsageKind::create, UsageKind::destroy, UsageKind::write,
                                             UsageKind::read, UsageKind::annotate};

  Megamodel m;
  m.name = coin(rng) ? "Gen" + std::to_string(index) : "Generated loop " + std::to_string(index);

  int nslots = uniform(rng, 0, 4);
  for (int i = 0; i < nslots; ++i) {
    ModelSlot s;
    s.name = "model" + std::to_string(i);
    if (coin(rng, 0.3)) s.display_name = "Model number " + std::to_string(i);
    s.stereotype = pick(rng, kinds);
    if (coin(rng, 0.15)) {
      s.stereotype = ModelStereotype::ReflectionModel;
      s.megamodel_ref = true;
    }
    m.slots.push_back(s);
  }

  int ninit = uniform(rng, 1, 2), nfinal = uniform(rng, 1, 3);
  for (int i = 0; i < ninit; ++i) {
    ControlState s;
    s.name = "In" + std::to_string(i);
    s.initial = true;
    if (coin(rng, 0.2)) s.display_name = "Initial " + std::to_string(i);
    m.states.push_back(s);
  }
  for (int i = 0; i < nfinal; ++i) {
    ControlState s;
    s.name = "Out" + std::to_string(i);
    s.final = true;
    s.destruction = coin(rng, 0.2);
    m.states.push_back(s);
  }

  int nops = uniform(rng, 1, 6);
  for (int i = 0; i < nops; ++i) {
    Operation op;
    op.name = "Op" + std::to_string(i);
    if (coin(rng, 0.3)) op.display_name = "Operation " + std::to_string(i);
    op.kind = coin(rng, 0.25) ? OperationKind::complex : OperationKind::basic;
    op.activity = op.kind == OperationKind::basic ? pick(rng, activities) : Activity::none;
    if (op.kind == OperationKind::complex)
      for (int e = 0, n = uniform(rng, 1, 2); e < n; ++e) op.entries.push_back("entry" + std::to_string(e));
    for (int e = 0, n = uniform(rng, 1, 3); e < n; ++e) op.exits.push_back("exit" + std::to_string(e));
    if (!m.slots.empty())
      for (int u = 0, n = uniform(rng, 0, 3); u < n; ++u)
        op.usages.push_back(ModelUsage{pick(rng, usages), pick(rng, m.slots).name});
    m.operations.push_back(op);
  }

  // Possible flow targets: operation entries, finals, decisions.
  int ndec = uniform(rng, 0, 2);
  std::vector<Endpoint> targets;
  for (const Operation& op : m.operations) {
    if (op.kind == OperationKind::basic) {
      targets.push_back(Endpoint{op.name, {}});
    } else {
      for (const std::string& e : op.entries) targets.push_back(Endpoint{op.name, e});
    }
  }
  for (const ControlState& s : m.states)
    if (s.final) targets.push_back(Endpoint{s.name, {}});
  for (int i = 0; i < ndec; ++i) targets.push_back(Endpoint{"Decide" + std::to_string(i), {}});

  for (int i = 0; i < ndec; ++i) {
    DecisionNode d;
    d.name = "Decide" + std::to_string(i);
    for (int b = 0, n = uniform(rng, 1, 2); b < n; ++b) {
      DecisionBranch br;
      br.condition = random_condition(rng, m, 2);
      Parsed<cond::ExprPtr> e = cond::parse_condition(br.condition);
      if (!e) throw std::logic_error("generated condition does not parse: " + br.condition);
      br.expr = *e;
      br.target = pick(rng, targets);
      d.branches.push_back(br);
    }
    DecisionBranch els;
    els.is_else = true;
    els.target = pick(rng, targets);
    d.branches.push_back(els);
    m.decisions.push_back(d);
  }

  for (const ControlState& s : m.states)
    if (s.initial) m.flows.push_back(FlowEdge{Endpoint{s.name, {}}, pick(rng, targets)});
  for (const Operation& op : m.operations)
    for (const std::string& e : op.exits) m.flows.push_back(FlowEdge{Endpoint{op.name, e}, pick(rng, targets)});
  std::shuffle(m.flows.begin(), m.flows.end(), rng);

  Diagnostics d = check_megamodel(m);
  if (!d.empty()) throw std::logic_error("generated megamodel is invalid: " + format_diagnostic(d.front()));
  return m;
}

// ---------------------------------------------------------------------------
// Corruption corpus

std::vector<Corruption> corruption_corpus() {
  const std::string mono = "fld/self-repair-monolithic.fld";
  const std::string sr = "fld/self-repair.fld";
  const std::string strat = "fld/self-repair-strategies.fld";
  const std::string upd = "fld/update-adaptable-software.fld";
  const std::string l3 = "ld/self-repair-strategies.ld";
  const std::string l2 = "ld/self-repair.ld";
  const std::string ev = "mrubis.events";
  return {
      {"empty exit list", mono, "exits { done }\n    reads TGGRules\n    annotates", "exits { }\n    reads TGGRules\n    annotates", "E-OP-EXITS"},
      {"duplicate exit", mono, "exits { failures, no_failures }", "exits { failures, failures }", "E-OP-EXITS"},
      {"no initial state", mono, "  initial Monitor\n  initial Analyze\n", "", "E-NO-INITIAL"},
      {"no final state", mono, "  final Analyzed\n  final Executed\n", "", "E-NO-FINAL"},
      {"duplicate state", mono, "final Executed", "final Analyzed", "E-NAME-DUP"},
      {"duplicate operation", mono, "operation Effect <<Execute>>", "operation Repair <<Execute>>", "E-NAME-DUP"},
      {"empty display name", mono, "\"Architectural Model\" as", "\"\" as", "E-NAME-INVALID"},
      {"reference slot not a reflection model", mono, "FailureAnalysisRules : EvaluationModel",
       "FailureAnalysisRules : EvaluationModel megamodel-ref", "E-SLOT-REF"},
      {"reference slot of wrong kind", strat, "feedbackLoopModel : ReflectionModel megamodel-ref",
       "feedbackLoopModel : ChangeModel megamodel-ref", "E-SLOT-REF"},
      {"entries on a basic operation", mono, "operation Effect <<Execute>> {\n", "operation Effect <<Execute>> {\n    entries { go }\n", "E-OP-ENTRIES"},
      {"usage of undeclared model", mono, "reads RepairStrategies", "reads Strategies", "E-USAGE-SLOT"},
      {"creates undeclared model", upd, "creates ArchitecturalModel", "creates Architecture", "E-USAGE-SLOT"},
      {"flow to unknown node", mono, "flow Effect.done -> Executed", "flow Effect.done -> Nowhere", "E-FLOW-ENDPOINT"},
      {"flow into an initial state", mono, "flow DeepCheck.done -> Repair", "flow DeepCheck.done -> Monitor", "E-FLOW-ENDPOINT"},
      {"flow from unknown exit", mono, "flow Repair.no_strategy -> Effect", "flow Repair.failed -> Effect", "E-FLOW-ENDPOINT"},
      {"flow into two-entry op without entry", "fld/self-management-1.fld", "flow Repair.Analyzed -> Optimize.Analyze", "flow Repair.Analyzed -> Optimize", "E-FLOW-ENDPOINT"},
      {"flow into unknown entry", sr, "flow Update.done -> Analyze.Start", "flow Update.done -> Analyze.Begin", "E-FLOW-ENDPOINT"},
      {"flow out of a final state", upd, "flow Effect.done -> Done\n", "flow Effect.done -> Done\n  flow Done -> Effect\n", "E-FLOW-ENDPOINT"},
      {"initial state without flow", mono, "  flow Analyze -> CheckForFailures\n", "", "E-INITIAL-FLOW"},
      {"exit without flow", mono, "  flow Repair.no_strategy -> Effect\n", "", "E-EXIT-FLOW"},
      {"exit with two flows", mono, "  flow Effect.done -> Executed\n", "  flow Effect.done -> Executed\n  flow Effect.done -> Analyzed\n", "E-EXIT-FLOW"},
      {"decision without else", mono, "    else -> Repair\n", "", "E-DEC-ELSE"},
      {"branch to unknown node", mono, "else -> Repair", "else -> Fix", "E-FLOW-ENDPOINT"},
      {"condition names unknown op", mono, "runsSince(CheckForFailures -> no_failures)", "runsSince(CheckFailures -> no_failures)", "E-COND-REF"},
      {"condition names unknown exit", mono, "runsSince(CheckForFailures -> no_failures)", "runsSince(CheckForFailures -> none)", "E-COND-REF"},
      {"condition missing operand", mono, "> 5 and runCount()", "> and runCount()", "E-COND-SYNTAX"},
      {"condition not boolean", mono, "and runCount() > 5\"", "and runCount()\"", "E-COND-SYNTAX"},
      {"unknown stereotype", mono, ": EvaluationModel", ": EvalModel", "E-SYNTAX"},
      {"unknown activity", mono, "<<Plan>>", "<<Planning>>", "E-SYNTAX"},
      {"unterminated string", mono, "megamodel \"Self-repair-monolithic\" {", "megamodel \"Self-repair-monolithic {", "E-SYNTAX"},

      {"duplicate layer", l3, "layer 2 \"Layer-2\"", "layer 1 \"Layer-2\"", "E-LAYER-DUP"},
      {"duplicate module", l3, "module selfRepairA : \"Self-repair-A\"", "module selfRepair : \"Self-repair-A\"", "E-MODULE-DUP"},
      {"unknown megamodel", l3, "module selfRepairA : \"Self-repair-A\"", "module selfRepairA : \"Self-repair-Z\"", "E-MODULE-REF"},
      {"unknown software key", l3, "\"harness.repair\"", "\"harness.repare\"", "E-BIND-UNKNOWN"},
      {"use of unknown operation", l3, "use selfRepair.Repair ->", "use selfRepair.Fix ->", "E-USE-OP"},
      {"basic op bound to megamodel", l3, "use selfRepair.Repair -> \"harness.repair\"", "use selfRepair.Repair -> selfRepairA", "E-USE-KIND"},
      {"complex op bound to software", l3, "use selfRepair.Analyze -> selfRepairA", "use selfRepair.Analyze -> \"harness.checkFailures\"", "E-USE-KIND"},
      {"signature mismatch", l3, "use selfRepair.Analyze -> selfRepairA", "use selfRepair.Analyze -> strategies", "E-SIG-MISMATCH"},
      {"parameter without receiving model", l3, "use selfRepair.Analyze -> selfRepairA", "use selfRepair.Analyze -> strategies", "E-ALIAS"},
      {"operation bound twice", l3, "  use selfRepair.Effect -> \"harness.effect\"\n",
       "  use selfRepair.Effect -> \"harness.effect\"\n  use selfRepair.Effect -> \"harness.repair\"\n", "E-USE-DUP"},
      {"operation unbound", l3, "  use selfRepairA.DeepCheck -> \"harness.deepCheck\"\n", "", "E-BIND-MISSING"},
      {"use cycle", l3, "use selfRepair.Analyze -> selfRepairA", "use selfRepair.Analyze -> selfRepair", "E-USE-CYCLE"},
      {"effect upward", l3, "effect strategies -> selfRepair [w]", "effect selfRepair -> strategies [w]", "E-LAYER-DIR"},
      {"sense upward", l3, "sense strategies <- selfRepair [r]", "sense selfRepair <- strategies [r]", "E-LAYER-DIR"},
      {"trigger on software sensor", l2, "sense selfRepair <- mRUBiS [r] trigger", "sense mRUBiS <- selfRepair [r] trigger", "E-TRIG-SENSOR"},
      {"trigger state not initial", l2, "10s; Monitor;", "10s; Analyzed;", "E-TRIG-STATE"},
      {"undeclared event type", l2, "\"RtException; 10s", "\"RtFailure; 10s", "E-TRIG-EVENT"},
      {"interception on software", l2, "\"RtException; 10s; Monitor;\"", "\"After[Update]; 10s; Monitor;\"", "E-TRIG-EVENT"},
      {"model bound to software", l3, "bind-model strategies.feedbackLoopModel -> selfRepair", "bind-model strategies.feedbackLoopModel -> mRUBiS", "E-BIND-MODEL"},
      {"reference model unbound", l3, "  bind-model strategies.feedbackLoopModel -> selfRepair\n", "", "E-BIND-MODEL"},
      {"bad effect mode", l2, "effect selfRepair -> mRUBiS [w]", "effect selfRepair -> mRUBiS [x]", "E-EDGE-MODE"},
      {"sense edge writes", l2, "<- mRUBiS [r]", "<- mRUBiS [w]", "E-EDGE-MODE"},
      {"trigger with two parts", l2, "\"RtException; 10s; Monitor;\"", "\"RtException; 10s\"", "E-TRIG-SYNTAX"},
      {"trigger unit", l2, "; 10s;", "; 10min;", "E-TRIG-UNIT"},
      {"trigger without events or period", l2, "\"RtException; 10s; Monitor;\"", "\" ; ; Monitor\"", "E-TRIG-EMPTY"},
      {"effect on unknown module", l2, "effect selfRepair -> mRUBiS [w]", "effect selfRepair -> shop [w]", "E-EDGE-REF"},
      {"unknown keyword", l2, "layer 1 \"Layer-1\"", "level 1 \"Layer-1\"", "E-SYNTAX"},

      {"event declared twice", ev, "event LoadIncrease;", "event LoadIncrease;\nevent RtException;", "E-EVENT-DUP"},
      {"unknown parent event", ev, "extends RtException", "extends RuntimeException", "E-EVENT-PARENT"},
  };
}

Diagnostics diagnose_text(const std::string& file, const std::string& text) {
  std::string ext = fs::path(file).extension().string();
  if (ext == ".fld") return parse_fld(text, file).diagnostics;
  if (ext == ".events") return parse_event_types(text, file).diagnostics;
  if (ext != ".ld") throw std::logic_error("no checker for " + file);
  Parsed<ArchitectureDecl> a = parse_ld(text, file);
  Diagnostics d = a.diagnostics;
  if (!a) return d;
  static const MegamodelRegistry reg = fixture_registry();
  static const EventTypeRegistry types = Harness::default_event_types();
  static const std::set<std::string, std::less<>> keys = [] {
    Harness h;
    SoftwareRegistry sw;
    h.register_operations(sw);
    return sw.keys();
  }();
  Diagnostics full = check_architecture(*a, ArchitectureContext{&reg, &types, &keys});
  d.insert(d.end(), full.begin(), full.end());
  return d;
}

Diagnostics diagnose(const Corruption& c) {
  std::string text = fixture_text(c.file);
  std::size_t at = text.find(c.find);
  if (at == std::string::npos) throw std::logic_error(c.name + ": pattern not found in " + c.file);
  text.replace(at, c.find.size(), c.replace);
  return diagnose_text(c.file, text);
}

// ---------------------------------------------------------------------------
// Oracles

namespace {

bool visible(const RunRecord& r) { return !r.aborted; }

bool run_has(const RunRecord& r, const std::string& op, const std::string& exit) {
  for (const OpExecution& x : r.ops)
    if (x.op == op && (exit.empty() || x.exit == exit)) return true;
  return false;
}

}  // namespace

std::optional<std::uint64_t> brute_runs_since(const ExecutionHistory& h, const RunRecord* current,
                                              const std::string& op, const std::string& exit) {
  std::vector<const RunRecord*> runs;
  for (const RunRecord& r : h.runs)
    if (visible(r)) runs.push_back(&r);
  if (current) runs.push_back(current);
  // Scan every candidate "latest match" position from the front; keep the last.
  std::optional<std::size_t> last;
  for (std::size_t i = 0; i < runs.size(); ++i)
    if (run_has(*runs[i], op, exit)) last = i;
  if (!last) return std::nullopt;
  std::uint64_t n = 0;
  for (std::size_t i = *last + 1; i < runs.size(); ++i) ++n;
  return n;
}

std::uint64_t brute_executions(const ExecutionHistory& h, const RunRecord* current, const std::string& op,
                               const std::string& exit) {
  std::uint64_t n = 0;
  auto count = [&](const RunRecord& r) {
    for (const OpExecution& x : r.ops)
      if (x.op == op && (exit.empty() || x.exit == exit)) ++n;
  };
  for (const RunRecord& r : h.runs)
    if (visible(r)) count(r);
  if (current) count(*current);
  return n;
}

std::vector<std::string> SelfRepairOracle::run() {
  ++runs_;
  std::vector<std::string> out{"Update done"};
  if (failed_.empty()) {
    out.push_back("CheckForFailures no_failures");
    last_clean_ = runs_;
    return out;
  }
  out.push_back("CheckForFailures failures");
  // Deep analysis when the last clean check lies more than five runs back
  // (or never happened) and the loop has run more than five times.
  bool stale = !last_clean_ || runs_ - *last_clean_ > 5;
  if (stale && runs_ > 5) out.push_back("DeepCheck done");
  bool covered = true;
  for (const auto& [comp, kind] : failed_)
    if (!strategies_.count(kind)) covered = false;
  out.push_back(covered ? "Repair planned" : "Repair no_strategy");
  out.push_back("Effect done");
  for (auto it = failed_.begin(); it != failed_.end();)
    it = strategies_.count(it->second) ? failed_.erase(it) : std::next(it);
  return out;
}

}  // namespace support

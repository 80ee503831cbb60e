#include "megart/snapshot.hpp"

#include "megart/dsl.hpp"

namespace megart {

namespace {

[[noreturn]] void corrupt(const std::string& what) { throw EngineError("E-SNAP-PARSE", what); }

Json event_json(const Event& e) {
  return Json{{"type", e.type}, {"source", e.source}, {"timestamp", e.timestamp}, {"payload", e.payload}};
}

Json history_json(const ExecutionHistory& h) {
  Json runs = Json::array();
  for (const RunRecord& r : h.runs) {
    Json ops = Json::array();
    for (const OpExecution& o : r.ops)
      ops.push_back(Json{{"op", o.op}, {"exit", o.exit}, {"start", o.start}, {"end", o.end}});
    runs.push_back(Json{{"runIndex", r.run_index},
                        {"start", r.start},
                        {"end", r.end},
                        {"initialState", r.initial_state},
                        {"finalState", r.final_state},
                        {"aborted", r.aborted},
                        {"ops", std::move(ops)}});
  }
  return runs;
}

ExecutionHistory history_from(const Json& j) {
  ExecutionHistory h;
  for (const Json& r : j) {
    RunRecord rec;
    rec.run_index = r.at("runIndex").get<std::uint64_t>();
    rec.start = r.at("start").get<Ticks>();
    rec.end = r.at("end").get<Ticks>();
    rec.initial_state = r.at("initialState").get<std::string>();
    rec.final_state = r.at("finalState").get<std::string>();
    rec.aborted = r.at("aborted").get<bool>();
    for (const Json& o : r.at("ops"))
      rec.ops.push_back(OpExecution{o.at("op").get<std::string>(), o.at("exit").get<std::string>(),
                                    o.at("start").get<Ticks>(), o.at("end").get<Ticks>()});
    h.runs.push_back(std::move(rec));
  }
  return h;
}

template <typename T>
T parsed_or_corrupt(Parsed<T> p, const std::string& what) {
  if (!p) corrupt(what + ": " + format_diagnostic(p.diagnostics.front()));
  return std::move(*p);
}

}  // namespace

Json export_snapshot(const Engine& engine) {
  if (engine.busy()) throw EngineError("E-NOT-QUIESCENT", "snapshot requested during a run");
  Json doc;
  doc["format"] = std::string(kSnapshotFormat);
  doc["engineTime"] = engine.now();
  doc["eventTypes"] = serialize_event_types(engine.event_types());
  doc["architecture"] = serialize_ld(engine.architecture());
  Json mms = Json::object();
  for (const auto& [name, m] : engine.megamodels()) mms[name] = serialize_fld(m);
  doc["megamodels"] = std::move(mms);

  Json insts = Json::object();
  for (const std::string& name : engine.instance_names()) {
    const ModuleInstance& i = *engine.instance(name);
    insts[name] = Json{{"megamodel", i.megamodel.name},
                       {"fld", serialize_fld(i.megamodel)},
                       {"models", i.model_ids},
                       {"history", history_json(i.history)},
                       {"lastRunEnd", i.last_run_end ? Json(*i.last_run_end) : Json(nullptr)},
                       {"createdAt", i.created_at}};
  }
  doc["instances"] = std::move(insts);

  Json models = Json::object();
  for (const auto& [id, m] : engine.models().all())
    models[id] = Json{{"kind", std::string(to_string(m.kind))}, {"body", m.body}, {"revision", m.revision}};
  doc["runtimeModels"] = std::move(models);

  Json pending = Json::array();
  for (const Activation& a : engine.pending())
    pending.push_back(Json{{"instance", a.instance},
                           {"initialState", a.initial_state},
                           {"cause", a.cause ? event_json(*a.cause) : Json(nullptr)},
                           {"enqueueTime", a.enqueue_time},
                           {"period", a.period},
                           {"seq", a.seq}});
  doc["pending"] = std::move(pending);
  return doc;
}

std::string export_snapshot_text(const Engine& engine) { return export_snapshot(engine).dump(2) + "\n"; }

void import_snapshot(Engine& engine, std::string_view text) {
  Json doc = Json::parse(text.begin(), text.end(), nullptr, false);
  if (doc.is_discarded()) corrupt("snapshot is not valid JSON");
  import_snapshot_json(engine, doc);
}

void import_snapshot_json(Engine& engine, const Json& doc) {
  if (!doc.is_object() || doc.value("format", "") != kSnapshotFormat) corrupt("not a snapshot document");
  try {
    EventTypeRegistry types =
        parsed_or_corrupt(parse_event_types(doc.at("eventTypes").get<std::string>(), "snapshot:eventTypes"),
                          "event types");
    MegamodelRegistry reg;
    for (const auto& [name, text] : doc.at("megamodels").items()) {
      Megamodel m = parsed_or_corrupt(parse_fld(text.get<std::string>(), "snapshot:" + name), "megamodel " + name);
      if (m.name != name) corrupt("megamodel key '" + name + "' names '" + m.name + "'");
      reg.emplace(name, std::move(m));
    }
    ArchitectureDecl arch =
        parsed_or_corrupt(parse_ld(doc.at("architecture").get<std::string>(), "snapshot:architecture"), "architecture");
    std::set<std::string, std::less<>> keys = engine.software().keys();
    Diagnostics diags = check_architecture(arch, ArchitectureContext{&reg, &types, &keys});
    if (has_errors(diags)) corrupt("architecture: " + format_diagnostic(diags.front()));

    ModelStore store;
    for (const auto& [id, m] : doc.at("runtimeModels").items()) {
      std::string kind = m.at("kind").get<std::string>();
      auto st = kind.empty() ? std::optional(ModelStereotype::none) : model_stereotype_from(kind);
      if (!st) corrupt("model '" + id + "' has unknown kind '" + kind + "'");
      store.put(id, *st, m.at("body")).revision = m.at("revision").get<std::uint64_t>();
    }

    std::vector<ModuleInstance> instances;
    for (const auto& [name, j] : doc.at("instances").items()) {
      const ModuleDecl* decl = arch.find_module(name);
      if (!decl || decl->kind != ModuleKind::megamodel) corrupt("instance '" + name + "' is not in the architecture");
      ModuleInstance i;
      i.name = name;
      i.megamodel = parsed_or_corrupt(parse_fld(j.at("fld").get<std::string>(), "snapshot:" + name), "instance " + name);
      if (i.megamodel.name != j.at("megamodel").get<std::string>()) corrupt("instance '" + name + "' megamodel mismatch");
      i.model_ids = j.at("models").get<std::map<std::string, std::string>>();
      for (const auto& [slot, id] : i.model_ids)
        if (!store.find(id)) corrupt("instance '" + name + "' refers to missing model '" + id + "'");
      i.history = history_from(j.at("history"));
      if (!j.at("lastRunEnd").is_null()) i.last_run_end = j.at("lastRunEnd").get<Ticks>();
      i.created_at = j.at("createdAt").get<Ticks>();
      instances.push_back(std::move(i));
    }
    for (const ModuleDecl& m : arch.modules)
      if (m.kind == ModuleKind::megamodel &&
          std::none_of(instances.begin(), instances.end(), [&](const ModuleInstance& i) { return i.name == m.instance; }))
        corrupt("module '" + m.instance + "' has no instance state");

    std::deque<Activation> pending;
    for (const Json& p : doc.at("pending")) {
      Activation a;
      a.instance = p.at("instance").get<std::string>();
      a.initial_state = p.at("initialState").get<std::string>();
      if (!p.at("cause").is_null()) {
        const Json& c = p.at("cause");
        Event e;
        e.type = c.at("type").get<std::string>();
        e.source = c.at("source").get<std::string>();
        e.timestamp = c.at("timestamp").get<Ticks>();
        e.payload = c.at("payload");
        a.cause = std::move(e);
      }
      a.enqueue_time = p.at("enqueueTime").get<Ticks>();
      a.period = p.at("period").get<Ticks>();
      a.seq = p.at("seq").get<std::uint64_t>();
      pending.push_back(std::move(a));
    }
    Ticks now = doc.at("engineTime").get<Ticks>();
    engine.restore(std::move(types), std::move(reg), std::move(arch), std::move(instances), std::move(store),
                   std::move(pending), now);
  } catch (const Json::exception& e) {
    corrupt(std::string("malformed snapshot: ") + e.what());
  }
}

}  // namespace megart

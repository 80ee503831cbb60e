#include "megart/harness.hpp"

#include <algorithm>
#include <cstdio>

namespace megart {

std::string_view to_string(Lifecycle l) {
  switch (l) {
    case Lifecycle::started: return "started";
    case Lifecycle::stopped: return "stopped";
    case Lifecycle::failed: return "failed";
  }
  return "";
}

Json SystemState::projection() const {
  Json comps = Json::object();
  for (const auto& [id, c] : components) {
    comps[id] = {{"name", c.name},
                 {"lifecycle", std::string(to_string(c.lifecycle))},
                 {"params", c.params},
                 {"failureKind", c.failure_kind ? Json(*c.failure_kind) : Json(nullptr)},
                 {"version", c.version}};
  }
  Json conns = Json::array();
  for (const auto& [a, b] : connectors) conns.push_back(Json::array({a, b}));
  return Json{{"components", comps}, {"connectors", conns}, {"load", load}};
}

SystemState default_system() {
  static const char* names[] = {"Authentication", "Catalog",   "Inventory", "Pricing",  "Recommendation",
                                "Search",         "Cart",      "Payment",   "Shipping"};
  SystemState s;
  for (int i = 0; i < 9; ++i) {
    std::string id = "c" + std::to_string(i + 1);
    s.components[id] = Component{id, names[i], Lifecycle::started, Json{{"replicas", 1}}, std::nullopt, 1};
  }
  s.connectors = {{"c1", "c2"}, {"c2", "c3"}, {"c2", "c4"}, {"c2", "c6"}, {"c6", "c5"},
                  {"c1", "c7"}, {"c7", "c3"}, {"c7", "c8"}, {"c8", "c9"}};
  return s;
}

Harness::Harness(HarnessOptions options) : options_(std::move(options)), system_(default_system()) {}

EventTypeRegistry Harness::default_event_types() {
  EventTypeRegistry t;
  t.add("RtException");
  t.add("OutOfMemoryRtException", "RtException");
  t.add("LoadIncrease");
  return t;
}

Event Harness::make_event(std::string type, Ticks now, Json payload) {
  Event e;
  e.type = std::move(type);
  e.source = options_.source;
  e.timestamp = now;
  e.payload = std::move(payload);
  char ts[32];
  std::snprintf(ts, sizeof ts, "%.6f", to_seconds(now));
  event_log_.push_back(std::string(ts) + " " + e.type + " " + e.source + " " + e.payload.dump());
  return e;
}

Event Harness::inject_failure(const std::string& component, const std::string& kind, Ticks now) {
  auto it = system_.components.find(component);
  if (it == system_.components.end()) throw EngineError("E-NO-COMPONENT", "no component '" + component + "'");
  it->second.lifecycle = Lifecycle::failed;
  it->second.failure_kind = kind;
  return make_event(kind == "oom" ? "OutOfMemoryRtException" : "RtException", now,
                    Json{{"component", component}, {"kind", kind}});
}

std::optional<Event> Harness::set_load(double load, Ticks now) {
  double old = system_.load;
  system_.load = load;
  if (load <= old) return std::nullopt;
  return make_event("LoadIncrease", now, Json{{"load", load}});
}

std::optional<Event> Harness::request(Ticks now) {
  for (const auto& [id, c] : system_.components) {
    if (c.lifecycle != Lifecycle::failed) continue;
    std::string kind = c.failure_kind.value_or("crash");
    return make_event(kind == "oom" ? "OutOfMemoryRtException" : "RtException", now,
                      Json{{"component", id}, {"kind", kind}});
  }
  return std::nullopt;
}

ModelInitializer Harness::initializer() const {
  return [](const std::string&, const ModelSlot& slot) -> std::optional<Json> {
    if (slot.name == "TGGRules") return Json{{"rules", "architecture-sync"}};
    if (slot.name == "FailureAnalysisRules") return Json{{"checks", Json::array({"lifecycle"})}};
    if (slot.name == "RepairStrategies") return Json{{"crash", "restart"}, {"oom", "restart"}};
    if (slot.name == "ReplacementRules") return Json{{"component", "c3"}, {"version", 2}};
    if (slot.name == "QueueingModel") return Json{{"threshold", 0.8}};
    if (slot.name == "ParameterVariability") return Json{{"component", "c5"}, {"param", "replicas"}, {"max", 4}};
    return std::nullopt;
  };
}

void Harness::apply_planned(Json& am) {
  if (!am.contains("planned")) return;
  for (const Json& a : am["planned"]) {
    auto it = system_.components.find(a.value("component", ""));
    if (it == system_.components.end()) continue;
    Component& c = it->second;
    std::string action = a.value("action", "");
    if (action == "restart") {
      c.lifecycle = Lifecycle::started;
      c.failure_kind.reset();
    } else if (action == "replace") {
      c.lifecycle = Lifecycle::started;
      c.failure_kind.reset();
      c.version = a.value("version", c.version + 1);
    } else if (action == "setParam") {
      c.params[a.value("param", "replicas")] = a["value"];
      system_.load *= 0.5;
    }
  }
  am["planned"] = Json::array();
  Json p = system_.projection();
  am["components"] = p["components"];
  am["load"] = p["load"];
}

namespace {

Json failed_kinds(const Json& am) {
  Json out = Json::object();
  if (!am.contains("components")) return out;
  for (const auto& [id, c] : am["components"].items())
    if (c.value("lifecycle", "") == "failed")
      out[id] = c["failureKind"].is_string() ? c["failureKind"].get<std::string>() : std::string("crash");
  return out;
}

Json missing_strategies(const Json& am, const Json& strategies) {
  Json missing = Json::array();
  Json failed = failed_kinds(am);
  for (const auto& [id, kind] : failed.items()) {
    std::string k = kind.get<std::string>();
    if (!strategies.contains(k) && std::find(missing.begin(), missing.end(), Json(k)) == missing.end())
      missing.push_back(k);
  }
  return missing;
}

/// The sensed megamodel module of `instance`'s first sense edge.
std::string sensed_module(const Engine& e, const std::string& instance) {
  for (const SenseEdge& s : e.architecture().senses) {
    const ModuleDecl* m = e.architecture().find_module(s.sensed);
    if (s.sensor == instance && m && m->kind == ModuleKind::megamodel) return s.sensed;
  }
  throw EngineError("E-MODEL-MISSING", "'" + instance + "' senses no megamodel module");
}

const Json& model_of(const Engine& e, const ReflectionView& v, const std::string& slot) {
  auto it = v.model_bindings.find(slot);
  const RuntimeModel* m = it == v.model_bindings.end() ? nullptr : e.models().find(it->second);
  if (!m) throw EngineError("E-MODEL-MISSING", "'" + v.instance + "' has no model '" + slot + "'");
  return m->body;
}

}  // namespace

void Harness::register_operations(SoftwareRegistry& reg) {
  auto op = [this, &reg](const std::string& key, std::function<std::string(OperationContext&)> body) {
    reg.add(key, [this, key, body = std::move(body)](OperationContext& ctx) {
      ctx.spend(options_.op_cost);
      std::string exit = body(ctx);
      dispatch_log_.push_back(key + " " + exit);
      return exit;
    });
  };

  // Key of the adaptable system itself; never dispatched by the fixtures.
  reg.add("harness.system", [](OperationContext&) { return std::string("done"); });

  op("harness.update", [this](OperationContext& ctx) {
    ctx.model("TGGRules");
    ctx.model("ArchitecturalModel").body = system_.projection();
    return std::string("done");
  });
  op("harness.checkFailures", [](OperationContext& ctx) {
    Json& am = ctx.model("ArchitecturalModel").body;
    Json failures = Json::array();
    Json failed = failed_kinds(am);
    for (const auto& [id, kind] : failed.items()) failures.push_back(id);
    bool any = !failures.empty();
    am["failures"] = std::move(failures);
    return std::string(any ? "failures" : "no_failures");
  });
  op("harness.deepCheck", [](OperationContext& ctx) {
    Json& am = ctx.model("ArchitecturalModel").body;
    am["rootCauses"] = failed_kinds(am);
    return std::string("done");
  });
  op("harness.repair", [](OperationContext& ctx) {
    const Json& strategies = ctx.model("RepairStrategies").body;
    Json& am = ctx.model("ArchitecturalModel").body;
    if (!am.contains("planned")) am["planned"] = Json::array();
    bool covered = true;
    Json failed = failed_kinds(am);
    for (const auto& [id, kind] : failed.items()) {
      std::string k = kind.get<std::string>();
      if (strategies.contains(k)) {
        am["planned"].push_back(Json{{"action", strategies[k]}, {"component", id}});
      } else {
        covered = false;
      }
    }
    return std::string(covered ? "planned" : "no_strategy");
  });
  auto effect = [this](OperationContext& ctx) {
    apply_planned(ctx.model("ArchitecturalModel").body);
    return std::string("done");
  };
  op("harness.effect", effect);
  op("harness.effectParams", effect);
  op("harness.analyzeBottleneck", [this](OperationContext& ctx) {
    const Json& qm = ctx.model("QueueingModel").body;
    Json& am = ctx.model("ArchitecturalModel").body;
    double threshold = qm.value("threshold", options_.load_threshold);
    bool hot = am.value("load", 0.0) > threshold;
    am["bottleneck"] = hot;
    return std::string(hot ? "bottleneck" : "no_bottleneck");
  });
  op("harness.planParams", [](OperationContext& ctx) {
    const Json& pv = ctx.model("ParameterVariability").body;
    Json& am = ctx.model("ArchitecturalModel").body;
    std::string comp = pv.value("component", "c5");
    std::string param = pv.value("param", "replicas");
    int current = 1;
    if (am.contains("components") && am["components"].contains(comp))
      current = am["components"][comp]["params"].value(param, 1);
    if (!am.contains("planned")) am["planned"] = Json::array();
    am["planned"].push_back(Json{{"action", "setParam"},
                                 {"component", comp},
                                 {"param", param},
                                 {"value", std::min(current + 1, pv.value("max", 4))}});
    return std::string("done");
  });

  op("harness.evaluateStrategies", [](OperationContext& ctx) {
    ReflectionView v = ctx.engine().reflect_query(ctx.bound_instance("feedbackLoopModel"));
    Json missing = missing_strategies(model_of(ctx.engine(), v, "ArchitecturalModel"),
                                      model_of(ctx.engine(), v, "RepairStrategies"));
    return std::string(missing.empty() ? "sufficient" : "insufficient");
  });
  op("harness.synthesizeStrategies", [](OperationContext& ctx) {
    std::string target = ctx.bound_instance("feedbackLoopModel");
    ReflectionView v = ctx.engine().reflect_query(target);
    Json strategies = model_of(ctx.engine(), v, "RepairStrategies");
    for (const Json& k : missing_strategies(model_of(ctx.engine(), v, "ArchitecturalModel"), strategies))
      strategies[k.get<std::string>()] = "replace";
    ctx.engine().replace_model(target, "RepairStrategies", std::move(strategies));
    return std::string("done");
  });

  op("harness.monitorSelfRepair", [](OperationContext& ctx) {
    std::string target = sensed_module(ctx.engine(), ctx.instance());
    ReflectionView v = ctx.engine().reflect_query(target);
    Json& m = ctx.model("SelfRepairModel").body;
    m = Json{{"target", target},
             {"strategies", model_of(ctx.engine(), v, "RepairStrategies")},
             {"failures", failed_kinds(model_of(ctx.engine(), v, "ArchitecturalModel"))},
             {"runs", v.run_count}};
    return std::string("done");
  });
  op("harness.analyzeStrategies", [](OperationContext& ctx) {
    Json& m = ctx.model("SelfRepairModel").body;
    Json missing = Json::array();
    for (const auto& [id, kind] : m["failures"].items())
      if (!m["strategies"].contains(kind.get<std::string>()) &&
          std::find(missing.begin(), missing.end(), kind) == missing.end())
        missing.push_back(kind);
    m["missing"] = missing;
    return std::string(missing.empty() ? "sufficient" : "insufficient");
  });
  op("harness.planStrategies", [](OperationContext& ctx) {
    Json& m = ctx.model("SelfRepairModel").body;
    Json next = m["strategies"];
    for (const Json& k : m["missing"]) next[k.get<std::string>()] = "replace";
    m["newStrategies"] = next;
    return std::string("done");
  });
  op("harness.executeStrategies", [](OperationContext& ctx) {
    const Json& m = ctx.model("SelfRepairModel").body;
    ctx.engine().replace_model(m["target"].get<std::string>(), "RepairStrategies", m["newStrategies"]);
    return std::string("done");
  });

  op("harness.createModel", [this](OperationContext& ctx) {
    ctx.model("TGGRules");
    ctx.model("ArchitecturalModel").body = system_.projection();
    return std::string("done");
  });
  op("harness.reconfigure", [](OperationContext& ctx) {
    const Json& rules = ctx.model("ReplacementRules").body;
    Json& am = ctx.model("ArchitecturalModel").body;
    if (!am.contains("planned")) am["planned"] = Json::array();
    am["planned"].push_back(Json{{"action", "replace"}, {"component", rules.value("component", "c3")},
                                 {"version", rules.value("version", 2)}});
    return std::string("done");
  });
}

}  // namespace megart

#pragma once

// Runtime models held by the engine. Bodies are opaque JSON documents; only
// the software modules that use a model interpret it.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "megart/metamodel.hpp"

namespace megart {

using Json = nlohmann::json;

struct RuntimeModel {
  std::string id;
  ModelStereotype kind = ModelStereotype::none;
  Json body = Json::object();
  std::uint64_t revision = 0;
};

class ModelStore {
 public:
  /// Creates or replaces the model `id`.
  RuntimeModel& put(const std::string& id, ModelStereotype kind, Json body);
  RuntimeModel* find(std::string_view id);
  const RuntimeModel* find(std::string_view id) const;
  bool remove(std::string_view id);
  void touch(std::string_view id);
  std::vector<std::string> ids() const;
  const std::map<std::string, RuntimeModel, std::less<>>& all() const { return models_; }
  void clear() { models_.clear(); }

 private:
  std::map<std::string, RuntimeModel, std::less<>> models_;
};

}  // namespace megart

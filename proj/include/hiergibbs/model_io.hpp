#pragma once

#include <json.hpp>
#include <optional>
#include <string>

#include "hiergibbs/model.hpp"
#include "hiergibbs/reparam.hpp"

namespace hiergibbs {

// Parsed model spec file: the model (with data, simulated if the spec asks
// for it) plus an optional embedded assignment.
struct LoadedModel {
  ModelInstance model;
  std::optional<CenteringAssignment> assignment;
};

LoadedModel model_from_json(const nlohmann::json& doc);
LoadedModel load_model_spec(const std::string& path);

}  // namespace hiergibbs

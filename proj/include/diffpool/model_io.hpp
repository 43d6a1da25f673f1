#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "diffpool/network.hpp"

namespace diffpool {

inline constexpr int kModelFormatVersion = 1;

// Model file: one JSON document
//   { format_version, layer_configs, params_by_group, metadata }
// params_by_group maps each group name to a per-layer list (weights as lists
// of rows). Doubles are written in shortest round-trip form, so save -> load
// reproduces every parameter bit for bit.
nlohmann::json model_to_json(const Model& model);
Model model_from_json(const nlohmann::json& doc);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace diffpool

#pragma once

#include <string>

#include "json.hpp"
#include "synthetic.hpp"
#include "training.hpp"

namespace gebc {

// JSON (de)serialization for the config surfaces. Parsers reject unknown
// keys with their full path and type errors name the offending key.

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& doc, const std::string& key_prefix);

nlohmann::json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& doc, const std::string& key_prefix);

nlohmann::json synthetic_spec_to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& doc);
SyntheticSpec load_synthetic_spec(const std::string& path);

// Full training config file: {"model": {...}, "train": {...}}; both sections
// optional, defaults applied. Empty path gives pure defaults.
struct FullConfig {
    ModelConfig model;
    TrainConfig train;
};
FullConfig load_full_config(const std::string& path_or_empty);
nlohmann::json full_config_to_json(const FullConfig& config);

}  // namespace gebc

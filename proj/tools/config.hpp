#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "redsds/learning.hpp"
#include "redsds/model.hpp"

namespace redsds::cli {

using nlohmann::json;

// Full key set with defaults. Every accepted key appears here.
json default_config();

// Overlays `layer` onto `base`. Keys missing from `base` are rejected, as are
// values whose JSON type differs from the default (integers may stand in for
// floating-point values).
void merge_config(json& base, const json& layer, const std::string& source);

json read_config_file(const std::filesystem::path& path);

// Applies "a.b.c=value"; the value parses as JSON when it can, else as a string.
void apply_override(json& config, const std::string& assignment);

model::ModelConfig model_config(const json& config);
learning::TrainConfig train_config(const json& config);

std::string git_describe();

}  // namespace redsds::cli

#pragma once

#include <filesystem>
#include <optional>

#include "config.hpp"

namespace redsds::cli {

struct RunOptions {
  json config;
  std::filesystem::path out;
  std::filesystem::path checkpoint;  // segment / forecast
  std::filesystem::path resume;      // train
};

// Writes train.jsonl, test.jsonl and manifest.json.
void cmd_generate(const RunOptions& run);
// Writes config.json, metrics.tsv, checkpoints/ and manifest.json.
void cmd_train(const RunOptions& run);
// Writes labels.txt, metrics.tsv and manifest.json.
void cmd_segment(const RunOptions& run);
// Writes forecasts.jsonl, crps.tsv and manifest.json.
void cmd_forecast(const RunOptions& run);

// Config stored next to a checkpoint by `train`, if any.
std::optional<json> checkpoint_config(const std::filesystem::path& checkpoint);

}  // namespace redsds::cli

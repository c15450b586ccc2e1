#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"
#include "redsds/error.hpp"

using namespace redsds;
using namespace redsds::cli;

namespace {

struct Flags {
  std::string config;
  std::vector<std::string> set;
  std::optional<std::uint64_t> seed;
  std::string out = "redsds_out";
  std::string checkpoint;
  std::string resume;
};

void common_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON config file; keys not in the defaults are rejected");
  cmd->add_option("--set", f.set, "Override a config key, e.g. --set model.num_switches=3 (repeatable)")
      ->allow_extra_args(false);
  cmd->add_option("--seed", f.seed, "Seed; overrides the config key 'seed'");
  cmd->add_option("--out", f.out, "Output directory")->capture_default_str();
}

// defaults < checkpoint config < --config file < --set < --seed
json resolve(const Flags& f, bool from_checkpoint) {
  json config = default_config();
  if (from_checkpoint && !f.checkpoint.empty()) {
    if (auto saved = checkpoint_config(f.checkpoint)) merge_config(config, *saved, "checkpoint config");
  }
  if (!f.config.empty()) merge_config(config, read_config_file(f.config), f.config);
  for (const auto& s : f.set) apply_override(config, s);
  if (f.seed) config["seed"] = *f.seed;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recurrent explicit-duration switching dynamical systems: data generation, training, "
               "segmentation and forecasting"};
  app.require_subcommand(1);
  Flags flags;

  auto* gen = app.add_subcommand("generate", "Write synthetic train/test datasets (data.generator)");
  common_flags(gen, flags);
  auto* train = app.add_subcommand("train", "Train on data.train; writes metrics.tsv and checkpoints/");
  common_flags(train, flags);
  train->add_option("--resume", flags.resume, "Checkpoint directory to continue from");
  auto* seg = app.add_subcommand("segment", "Label data.test with a trained model; writes labels.txt, metrics.tsv");
  common_flags(seg, flags);
  seg->add_option("--checkpoint", flags.checkpoint, "Checkpoint directory")->required();
  auto* fc = app.add_subcommand("forecast", "Forecast data.test; writes forecasts.jsonl, crps.tsv");
  common_flags(fc, flags);
  fc->add_option("--checkpoint", flags.checkpoint, "Checkpoint directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    RunOptions run;
    run.out = flags.out;
    run.checkpoint = flags.checkpoint;
    run.resume = flags.resume;
    if (gen->parsed()) {
      run.config = resolve(flags, false);
      cmd_generate(run);
    } else if (train->parsed()) {
      run.config = resolve(flags, false);
      cmd_train(run);
    } else if (seg->parsed()) {
      run.config = resolve(flags, true);
      cmd_segment(run);
    } else {
      run.config = resolve(flags, true);
      cmd_forecast(run);
    }
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

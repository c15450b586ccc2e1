#include "config.hpp"

#include <fstream>
#include <functional>

#include "redsds/error.hpp"

#ifndef REDSDS_GIT_DESCRIBE
#define REDSDS_GIT_DESCRIBE "unknown"
#endif

namespace redsds::cli {

namespace {

json anneal(double initial, double minimum, double rate, std::int64_t begin, std::int64_t every) {
  return {{"initial", initial}, {"minimum", minimum}, {"rate", rate}, {"begin", begin}, {"every", every}};
}

bool compatible(const json& def, const json& v) {
  if (def.is_number() && v.is_number()) {
    if (def.is_number_float()) return true;
    // integer defaults reject fractional and negative values
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
  }
  return def.type() == v.type();
}

learning::AnnealSchedule anneal_from(const json& j) {
  learning::AnnealSchedule a;
  a.initial = j.at("initial").get<double>();
  a.minimum = j.at("minimum").get<double>();
  a.rate = j.at("rate").get<double>();
  a.begin = j.at("begin").get<std::int64_t>();
  a.every = j.at("every").get<std::int64_t>();
  return a;
}

}  // namespace

json default_config() {
  json c;
  c["seed"] = 0;
  c["data"] = {{"generator", "bouncing_ball"},
               {"train_series", 0},
               {"test_series", 0},
               {"length", 0},
               {"noise_sd", 0.1},
               {"trend", 0.0},
               {"train", ""},
               {"test", ""}};
  c["model"] = {{"num_switches", 2},
                {"min_duration", 1},
                {"max_duration", 20},
                {"state_dim", 4},
                {"obs_dim", 1},
                {"nonlinear_transition", true},
                {"nonlinear_emission", true},
                {"transition_hidden", {32}},
                {"emission_hidden", {8, 32}},
                {"switch_hidden", 0},
                {"controls_enabled", false},
                {"num_static_ids", 1},
                {"static_embed_dim", 5},
                {"time_feature_dim", 0},
                {"control_dim", 16},
                {"control_hidden", 32},
                {"duration_hidden", 64},
                {"embedder_hidden", 4},
                {"rnn_hidden", 16},
                {"posterior_hidden", {32}}};
  c["train"] = {{"batch_size", 32},
                {"steps", 20000},
                {"samples", 1},
                {"window", 0},
                {"normalization", "none"},
                {"checkpoint_every", 0},
                {"optimizer",
                 {{"beta1", 0.9},
                  {"beta2", 0.999},
                  {"epsilon", 1e-8},
                  {"weight_decay", 1e-5},
                  {"clip_norm", 10.0},
                  {"warmup_start", 1e-4},
                  {"peak_lr", 5e-3},
                  {"warmup_steps", 1000},
                  {"decay_rate", 0.99}}},
                {"switch_temperature", anneal(1.0, 1.0, 1.0, 0, 1)},
                {"duration_temperature", anneal(10.0, 1.0, 0.99, 1000, 50)}};
  c["segment"] = {{"batch_size", 64}};
  c["forecast"] = {{"context", 0}, {"horizon", 50}, {"num_paths", 100}, {"sample_noise", true}};
  return c;
}

void merge_config(json& base, const json& layer, const std::string& source) {
  if (!layer.is_object()) throw ContractError(source + ": config must be a JSON object");
  std::function<void(json&, const json&, const std::string&)> walk = [&](json& b, const json& l,
                                                                         const std::string& prefix) {
    for (auto it = l.begin(); it != l.end(); ++it) {
      const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
      if (!b.contains(it.key())) throw ContractError(source + ": unknown config key '" + key + "'");
      json& target = b[it.key()];
      if (target.is_object()) {
        if (!it->is_object()) throw ContractError(source + ": '" + key + "' must be an object");
        walk(target, *it, key);
      } else {
        if (!compatible(target, *it))
          throw ContractError(source + ": '" + key + "' expects " + std::string(target.type_name()) + ", got " +
                              it->type_name());
        // keep float keys float so a later layer may set a fractional value
        target = target.is_number_float() ? json(it->get<double>()) : *it;
      }
    }
  };
  walk(base, layer, "");
}

json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ContractError(path.string() + ": " + e.what());
  }
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ContractError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  // rebuild the dotted path as a nested object and merge it
  json layer = value;
  std::string rest = key;
  std::vector<std::string> parts;
  for (std::size_t pos; (pos = rest.find('.')) != std::string::npos; rest = rest.substr(pos + 1))
    parts.push_back(rest.substr(0, pos));
  parts.push_back(rest);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) layer = json{{*it, layer}};
  merge_config(config, layer, "--set " + key);
}

model::ModelConfig model_config(const json& c) {
  const json& m = c.at("model");
  model::ModelConfig cfg;
  cfg.num_switches = m.at("num_switches").get<std::size_t>();
  cfg.min_duration = m.at("min_duration").get<std::size_t>();
  cfg.max_duration = m.at("max_duration").get<std::size_t>();
  cfg.state_dim = m.at("state_dim").get<std::size_t>();
  cfg.obs_dim = m.at("obs_dim").get<std::size_t>();
  cfg.nonlinear_transition = m.at("nonlinear_transition").get<bool>();
  cfg.nonlinear_emission = m.at("nonlinear_emission").get<bool>();
  cfg.transition_hidden = m.at("transition_hidden").get<std::vector<std::size_t>>();
  cfg.emission_hidden = m.at("emission_hidden").get<std::vector<std::size_t>>();
  cfg.switch_hidden = m.at("switch_hidden").get<std::size_t>();
  cfg.controls_enabled = m.at("controls_enabled").get<bool>();
  cfg.num_static_ids = m.at("num_static_ids").get<std::size_t>();
  cfg.static_embed_dim = m.at("static_embed_dim").get<std::size_t>();
  cfg.time_feature_dim = m.at("time_feature_dim").get<std::size_t>();
  cfg.control_dim = m.at("control_dim").get<std::size_t>();
  cfg.control_hidden = m.at("control_hidden").get<std::size_t>();
  cfg.duration_hidden = m.at("duration_hidden").get<std::size_t>();
  cfg.embedder_hidden = m.at("embedder_hidden").get<std::size_t>();
  cfg.rnn_hidden = m.at("rnn_hidden").get<std::size_t>();
  cfg.posterior_hidden = m.at("posterior_hidden").get<std::vector<std::size_t>>();
  cfg.validate();
  return cfg;
}

learning::TrainConfig train_config(const json& c) {
  const json& t = c.at("train");
  learning::TrainConfig tc;
  tc.batch_size = t.at("batch_size").get<std::size_t>();
  tc.steps = t.at("steps").get<std::int64_t>();
  tc.seed = c.at("seed").get<std::uint64_t>();
  tc.samples = t.at("samples").get<std::size_t>();
  tc.window = t.at("window").get<std::size_t>();
  tc.normalization = forecast::parse_normalization(t.at("normalization").get<std::string>());
  tc.checkpoint_every = t.at("checkpoint_every").get<std::int64_t>();
  const json& o = t.at("optimizer");
  tc.optimizer.beta1 = o.at("beta1").get<double>();
  tc.optimizer.beta2 = o.at("beta2").get<double>();
  tc.optimizer.epsilon = o.at("epsilon").get<double>();
  tc.optimizer.weight_decay = o.at("weight_decay").get<double>();
  tc.optimizer.clip_norm = o.at("clip_norm").get<double>();
  tc.optimizer.schedule.warmup_start = o.at("warmup_start").get<double>();
  tc.optimizer.schedule.peak = o.at("peak_lr").get<double>();
  tc.optimizer.schedule.warmup_steps = o.at("warmup_steps").get<std::int64_t>();
  tc.optimizer.schedule.decay_rate = o.at("decay_rate").get<double>();
  tc.optimizer.schedule.total_steps = tc.steps;
  tc.switch_temperature = anneal_from(t.at("switch_temperature"));
  tc.duration_temperature = anneal_from(t.at("duration_temperature"));
  tc.validate();
  return tc;
}

std::string git_describe() { return REDSDS_GIT_DESCRIBE; }

}  // namespace redsds::cli

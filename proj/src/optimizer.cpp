#include "redsds/optimizer.hpp"

#include <cmath>
#include <numbers>

#include "redsds/error.hpp"

namespace redsds::nn {

double LearningRateSchedule::at(std::int64_t step) const {
  require(step >= 0, "learning rate requested for a negative step");
  if (step < warmup_steps) {
    const double frac = static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
    return warmup_start + (peak - warmup_start) * frac;
  }
  const std::int64_t span = std::max<std::int64_t>(1, total_steps - warmup_steps);
  const double progress = std::min(1.0, static_cast<double>(step - warmup_steps) / static_cast<double>(span));
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return peak * ((1.0 - decay_rate) + decay_rate * cosine);
}

double clip_by_global_norm(GradMap& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& [_, g] : grads)
      for (double& v : g) v *= scale;
  }
  return norm;
}

StepReport adam_step(ParamStore& params, GradMap grads, OptimizerState& state, const AdamConfig& config) {
  require(grads.size() == params.size(), "adam_step: gradient map does not match parameters");
  StepReport report;
  report.grad_norm = clip_by_global_norm(grads, config.clip_norm);
  report.learning_rate = config.schedule.at(state.step);
  const double lr = report.learning_rate;
  const double t = static_cast<double>(state.step + 1);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);

  for (const auto& [name, tensor] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) throw ContractError("adam_step: missing gradient for " + name);
    const auto& g = git->second;
    Tensor p = tensor;
    auto values = p.mutable_values();
    if (g.size() != values.size()) throw ContractError("adam_step: gradient shape mismatch for " + name);
    auto& m = state.first_moment[name];
    auto& v = state.second_moment[name];
    if (m.empty()) m.assign(values.size(), 0.0);
    if (v.empty()) v.assign(values.size(), 0.0);
    if (m.size() != values.size() || v.size() != values.size())
      throw ContractError("adam_step: moment shape mismatch for " + name);
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double mhat = m[i] / bias1;
      const double vhat = v[i] / bias2;
      values[i] -= lr * (mhat / (std::sqrt(vhat) + config.epsilon) + config.weight_decay * values[i]);
    }
  }
  ++state.step;
  return report;
}

void OptimizerState::save(const std::filesystem::path& path) const {
  ParamStore store;
  for (const auto& [name, m] : first_moment) store.add("m/" + name, {m.size()}, m);
  for (const auto& [name, v] : second_moment) store.add("v/" + name, {v.size()}, v);
  store.add("step", {1}, {static_cast<double>(step)});
  store.save(path);
}

OptimizerState OptimizerState::load(const std::filesystem::path& path) {
  const ParamStore store = ParamStore::load(path);
  OptimizerState state;
  for (const auto& [name, t] : store) {
    std::vector<double> values(t.values().begin(), t.values().end());
    if (name == "step") {
      state.step = static_cast<std::int64_t>(values.at(0));
    } else if (name.starts_with("m/")) {
      state.first_moment.emplace(name.substr(2), std::move(values));
    } else if (name.starts_with("v/")) {
      state.second_moment.emplace(name.substr(2), std::move(values));
    } else {
      throw DataError("unexpected entry '" + name + "' in optimizer state " + path.string());
    }
  }
  return state;
}

}  // namespace redsds::nn

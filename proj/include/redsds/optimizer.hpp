#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "redsds/param_store.hpp"

namespace redsds::nn {

// Linear warmup from `warmup_start` to `peak` over `warmup_steps`, followed
// by a cosine decay over the remaining steps. `decay_rate` is the fraction of
// the peak rate removed by the end of training (0.99 ends at 1% of peak).
struct LearningRateSchedule {
  double warmup_start = 0.0;
  double peak = 5e-3;
  std::int64_t warmup_steps = 1000;
  std::int64_t total_steps = 20000;
  double decay_rate = 0.99;

  double at(std::int64_t step) const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-5;  // decoupled
  double clip_norm = 10.0;     // <= 0 disables clipping
  LearningRateSchedule schedule;
};

struct OptimizerState {
  std::map<std::string, std::vector<double>> first_moment;
  std::map<std::string, std::vector<double>> second_moment;
  std::int64_t step = 0;

  void save(const std::filesystem::path& path) const;
  static OptimizerState load(const std::filesystem::path& path);
};

struct StepReport {
  double learning_rate = 0.0;
  double grad_norm = 0.0;  // before clipping
};

// Scales `grads` in place so that their global norm is at most `max_norm`.
// Returns the norm before scaling.
double clip_by_global_norm(GradMap& grads, double max_norm);

// One AdamW update. Gradients are of the loss to be minimized.
StepReport adam_step(ParamStore& params, GradMap grads, OptimizerState& state, const AdamConfig& config);

}  // namespace redsds::nn

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "redsds/datasets.hpp"
#include "redsds/inference_net.hpp"
#include "redsds/model.hpp"
#include "redsds/normalization.hpp"
#include "redsds/optimizer.hpp"

namespace redsds::learning {

// Exponential temperature decay: `initial` until step `begin`, then multiplied
// by `rate` once every `every` steps, never below `minimum`.
struct AnnealSchedule {
  double initial = 1.0;
  double minimum = 1.0;
  double rate = 1.0;
  std::int64_t begin = 0;
  std::int64_t every = 1;

  static AnnealSchedule fixed(double value) { return {value, value, 1.0, 0, 1}; }
  void validate() const;
  double at(std::int64_t step) const;
};

struct TrainConfig {
  std::size_t batch_size = 32;
  std::int64_t steps = 20000;
  std::uint64_t seed = 0;
  std::size_t samples = 1;  // posterior samples per series and step
  std::size_t window = 0;   // training window length, 0 uses whole series
  forecast::Normalization normalization = forecast::Normalization::none;
  std::int64_t checkpoint_every = 0;  // 0 writes only the final checkpoint
  nn::AdamConfig optimizer;
  AnnealSchedule switch_temperature;
  AnnealSchedule duration_temperature;

  void validate() const;
  model::Temperatures temperatures(std::int64_t step) const {
    return {switch_temperature.at(step), duration_temperature.at(step)};
  }
};

// Equal-length series stacked time-major: row t * B + s.
struct Batch {
  std::size_t T = 0, B = 0, dim = 0;
  std::vector<double> y;                          // [T * B, dim]
  std::vector<model::SeriesControls> controls;    // empty without controls
  std::vector<double> log_det;                    // per series; empty without normalization
  std::vector<std::int64_t> ids;
};

// Windows [offset, offset + T) of the given records. offsets may be empty
// (all zero). Normalization statistics come from each window.
Batch make_batch(std::span<const data::TimeSeriesRecord* const> records, std::size_t T,
                 std::span<const std::size_t> offsets, forecast::Normalization normalization);
Batch make_batch(std::span<const data::TimeSeriesRecord> records);

struct ElboResult {
  nn::Tensor objective;  // [1], batch mean of loglik - log_q (+ log_det)
  nn::Tensor loglik;     // [B], log p(y, x~)
  inference::PosteriorSample sample;
  hsmm::DPTensors dp;
};

// Single-sample bound for every series in the batch. noise: [T * B, m].
ElboResult elbo(const model::SwitchingModel& model, const inference::InferenceNetwork& net, const Batch& batch,
                const model::Temperatures& temps, const nn::Tensor& noise);

nn::Tensor standard_normal(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

struct StepMetrics {
  std::int64_t step = 0;
  double elbo = 0.0;
  double tau_z = 0.0;
  double tau_rho = 0.0;
  double learning_rate = 0.0;
  double grad_norm = 0.0;
};
// Tab-separated step, elbo, tau_z, tau_rho, lr, grad_norm.
std::string format_metrics(const StepMetrics& m);
std::string metrics_header();

// Model, inference network and optimizer state with deterministic steps.
class Trainer {
 public:
  Trainer(const model::ModelConfig& model_config, const TrainConfig& train_config);

  // One optimizer step on a batch drawn from `records` with the RNG derived
  // from (seed, step). Throws NumericError on a non-finite objective, after
  // writing the batch to `dump_dir` when given.
  StepMetrics step(std::span<const data::TimeSeriesRecord> records,
                   const std::filesystem::path& dump_dir = {});

  std::int64_t steps_done() const { return state_.step; }
  // Writes params.ckpt and optimizer.ckpt into `dir`.
  void save(const std::filesystem::path& dir) const;
  void load(const std::filesystem::path& dir);

  const model::SwitchingModel& model() const { return model_; }
  const inference::InferenceNetwork& network() const { return net_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }
  const TrainConfig& config() const { return train_config_; }

 private:
  model::ModelConfig model_config_;
  TrainConfig train_config_;
  nn::ParamStore store_;
  std::mt19937_64 init_rng_;
  model::SwitchingModel model_;
  inference::InferenceNetwork net_;
  nn::OptimizerState state_;
};

// Trains until `steps` are done, appending metrics lines to `metrics` (when
// set) and writing checkpoints under `checkpoint_dir` (when non-empty).
void train(Trainer& trainer, std::span<const data::TimeSeriesRecord> records,
           const std::function<void(const StepMetrics&)>& on_step, const std::filesystem::path& checkpoint_dir = {});

// Mean single-sample bound over `records` with a fixed noise seed, no gradients.
double evaluate_elbo(const model::SwitchingModel& model, const inference::InferenceNetwork& net,
                     std::span<const data::TimeSeriesRecord> records, const model::Temperatures& temps,
                     std::uint64_t seed, std::size_t batch_size = 64);

}  // namespace redsds::learning

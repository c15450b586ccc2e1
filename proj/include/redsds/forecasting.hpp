#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "redsds/datasets.hpp"
#include "redsds/inference_net.hpp"
#include "redsds/model.hpp"
#include "redsds/normalization.hpp"

namespace redsds::forecast {

// {0.05, 0.10, ..., 0.95}
std::vector<double> default_quantile_grid();

// Empirical quantile: sorted[round_half_even((n - 1) * level)].
double empirical_quantile(std::span<const double> sorted_samples, double level);

// sum over the grid of 2 * pinball(q_alpha, y) * delta_alpha, with delta_alpha
// the grid spacing (uniform grids) or 1 / grid size otherwise.
double crps(std::span<const double> samples, double y, std::span<const double> grid);
// E|X - y| - E|X - X'| / 2 over the empirical distribution.
double crps_energy(std::span<const double> samples, double y);

struct ForecastPath {
  std::vector<double> y;       // [horizon, d], denormalized
  std::vector<int> z;          // [horizon + 1], index 0 is the sampled z_T
  std::vector<std::size_t> c;  // [horizon + 1], 1-based counts
};

struct ForecastResult {
  std::size_t horizon = 0;
  std::size_t dim = 0;
  std::vector<ForecastPath> paths;

  // [levels, horizon * dim]
  std::vector<std::vector<double>> quantiles(std::span<const double> levels) const;
  std::vector<double> mean() const;  // [horizon * dim]
  // Samples of (t, dim) across paths.
  std::vector<double> samples_at(std::size_t t, std::size_t dim_index = 0) const;
};

struct ForecastOptions {
  std::size_t horizon = 0;
  std::size_t num_paths = 100;
  std::uint64_t seed = 0;
  bool sample_noise = true;  // false uses means of q, transitions and emissions
  Normalization normalization = Normalization::none;
  model::Temperatures temperatures;
};

// Conditions on the first `context` steps of `record` and unrolls the model
// for options.horizon steps. Controls, when enabled, must cover context + horizon.
ForecastResult forecast_unroll(const model::SwitchingModel& model, const inference::InferenceNetwork& net,
                               const data::TimeSeriesRecord& record, std::size_t context,
                               const ForecastOptions& options);

// Repeats the last context value over the horizon.
std::vector<double> persistence_forecast(const data::TimeSeriesRecord& record, std::size_t context,
                                         std::size_t horizon);

// Mean CRPS over the horizon of a univariate forecast against record values
// [context, context + horizon).
double mean_crps(const ForecastResult& f, const data::TimeSeriesRecord& record, std::size_t context,
                 std::span<const double> grid);

}  // namespace redsds::forecast

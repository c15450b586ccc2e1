#include "redsds/forecasting.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "redsds/error.hpp"
#include "redsds/hsmm.hpp"
#include "redsds/prob.hpp"

namespace redsds::forecast {

std::vector<double> default_quantile_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 19; ++i) g.push_back(i / 20.0);
  return g;
}

double empirical_quantile(std::span<const double> sorted, double level) {
  require(!sorted.empty(), "empirical_quantile: no samples");
  require(level >= 0.0 && level <= 1.0, "empirical_quantile: level outside [0, 1]");
  const double pos = std::nearbyint(static_cast<double>(sorted.size() - 1) * level);
  return sorted[static_cast<std::size_t>(pos)];
}

double crps(std::span<const double> samples, double y, std::span<const double> grid) {
  require(!grid.empty(), "crps: empty quantile grid");
  require(!samples.empty(), "crps: no samples");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    require(grid[i] > 0.0 && grid[i] < 1.0, "crps: grid levels must lie in (0, 1)");
    require(i == 0 || grid[i] > grid[i - 1], "crps: grid must be sorted");
  }
  double delta = 1.0 / static_cast<double>(grid.size());
  if (grid.size() > 1) {
    const double step = grid[1] - grid[0];
    bool uniform = true;
    for (std::size_t i = 2; i < grid.size(); ++i) uniform = uniform && std::abs(grid[i] - grid[i - 1] - step) < 1e-9;
    if (uniform) delta = step;
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  double total = 0.0;
  for (double a : grid) {
    const double q = empirical_quantile(sorted, a);
    const double indicator = y < q ? 1.0 : 0.0;
    total += 2.0 * (a - indicator) * (y - q) * delta;
  }
  return total;
}

double crps_energy(std::span<const double> samples, double y) {
  require(!samples.empty(), "crps_energy: no samples");
  const double n = static_cast<double>(samples.size());
  double e1 = 0.0;
  for (double x : samples) e1 += std::abs(x - y);
  e1 /= n;
  // E|X - X'| from sorted samples: sum_i (2i - n + 1) x_(i) * 2 / n^2
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  double e2 = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) e2 += (2.0 * static_cast<double>(i) - n + 1.0) * s[i];
  e2 = 2.0 * e2 / (n * n);
  return e1 - 0.5 * e2;
}

std::vector<double> ForecastResult::samples_at(std::size_t t, std::size_t dim_index) const {
  std::vector<double> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(p.y[t * dim + dim_index]);
  return out;
}

std::vector<std::vector<double>> ForecastResult::quantiles(std::span<const double> levels) const {
  std::vector<std::vector<double>> out(levels.size(), std::vector<double>(horizon * dim));
  if (paths.empty()) return out;
  for (std::size_t t = 0; t < horizon; ++t)
    for (std::size_t j = 0; j < dim; ++j) {
      std::vector<double> s = samples_at(t, j);
      std::sort(s.begin(), s.end());
      for (std::size_t l = 0; l < levels.size(); ++l) out[l][t * dim + j] = empirical_quantile(s, levels[l]);
    }
  return out;
}

std::vector<double> ForecastResult::mean() const {
  std::vector<double> out(horizon * dim, 0.0);
  for (const auto& p : paths)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += p.y[i];
  for (double& v : out) v /= static_cast<double>(std::max<std::size_t>(1, paths.size()));
  return out;
}

ForecastResult forecast_unroll(const model::SwitchingModel& model, const inference::InferenceNetwork& net,
                               const data::TimeSeriesRecord& record, std::size_t context,
                               const ForecastOptions& options) {
  const auto& cfg = model.config();
  const std::size_t T = context, H = options.horizon, M = options.num_paths;
  const std::size_t K = cfg.num_switches, D = cfg.max_duration, m = cfg.state_dim, d = cfg.obs_dim;
  require(T >= 1 && T <= record.length(), "forecast: context must lie within the record");
  require(M >= 1, "forecast: need at least one path");
  require(record.dim == d, "forecast: observation dimension does not match the model");
  ForecastResult result;
  result.horizon = H;
  result.dim = d;
  if (cfg.controls_enabled) {
    if (!record.controls) throw DataError("forecast: record " + std::to_string(record.id) + " has no controls");
    const std::size_t F = record.controls->time_dim;
    if (F > 0 && record.controls->time.size() < (T + H) * F)
      throw DataError("forecast: record " + std::to_string(record.id) + " lacks future controls for the horizon");
  }

  nn::NoGradGuard guard;
  const NormalizedSeries norm =
      normalize(std::span<const double>(record.target.data(), T * d), options.normalization,
                "record " + std::to_string(record.id));
  std::vector<double> y(T * M * d);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t s = 0; s < M; ++s) std::copy_n(norm.values.begin() + t * d, d, y.begin() + (t * M + s) * d);
  const nn::Tensor Y = nn::Tensor::constant({T * M, d}, std::move(y));

  nn::Tensor U_all, U_ctx;
  if (cfg.controls_enabled) {
    model::SeriesControls sc;
    sc.static_id = record.controls->static_id;
    const std::size_t F = record.controls->time_dim;
    sc.time_features.assign(record.controls->time.begin(), record.controls->time.begin() + (T + H) * F);
    const std::vector<model::SeriesControls> all(M, sc);
    U_all = model.batch_controls(all, T + H);
    U_ctx = nn::slice_rows(U_all, 0, T * M);
  }

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto noise = [&](std::size_t rows, std::size_t cols) {
    std::vector<double> v(rows * cols, 0.0);
    if (options.sample_noise)
      for (double& e : v) e = normal(rng);
    return nn::Tensor::constant({rows, cols}, std::move(v));
  };

  const auto sample = net.sample(Y, U_ctx, noise(T * M, m), T, M);
  const auto dp = model.dp_tensors(Y, sample.x, U_ctx, T, M, options.temperatures);
  std::vector<std::size_t> z(M), c(M);
  result.paths.resize(M);
  for (std::size_t s = 0; s < M; ++s) {
    const auto post = hsmm::posterior(hsmm::extract(dp, T, M, D, s));
    const std::span<const double> last(post.gamma.data() + (T - 1) * K * D, K * D);
    const std::size_t idx = prob::sample_index(last, unif(rng));
    z[s] = idx / D;
    c[s] = idx % D + 1;
    result.paths[s].z.push_back(static_cast<int>(z[s]));
    result.paths[s].c.push_back(c[s]);
  }
  nn::Tensor x = nn::slice_rows(sample.x, (T - 1) * M, T * M);
  const model::DurationTensors shared =
      cfg.controls_enabled ? model::DurationTensors{} : model.duration_tables({}, options.temperatures.duration_tau);

  for (std::size_t h = 0; h < H; ++h) {
    const std::size_t t = T + h;
    const nn::Tensor u = cfg.controls_enabled ? nn::slice_rows(U_all, t * M, (t + 1) * M) : nn::Tensor{};
    const model::DurationTensors dur =
        cfg.controls_enabled ? model.duration_tables(u, options.temperatures.duration_tau) : shared;
    const nn::Tensor la = model.switch_log_transition(x, u, options.temperatures.switch_tau);
    for (std::size_t s = 0; s < M; ++s) {
      const std::size_t row = cfg.controls_enabled ? s : 0;
      const double v = std::exp(dur.log_v[row * K * D + z[s] * D + c[s] - 1]);
      if (unif(rng) < v) {
        ++c[s];
      } else {
        c[s] = 1;
        std::vector<double> p(K);
        for (std::size_t j = 0; j < K; ++j) p[j] = std::exp(la[s * K * K + z[s] * K + j]);
        z[s] = prob::sample_index(p, unif(rng));
      }
      result.paths[s].z.push_back(static_cast<int>(z[s]));
      result.paths[s].c.push_back(c[s]);
    }
    // Next state per path from the head of its switch.
    std::vector<double> means(M * m), vars(M * m);
    for (std::size_t k = 0; k < K; ++k) {
      const auto g = model.transition(k, x, u);
      for (std::size_t s = 0; s < M; ++s) {
        if (z[s] != k) continue;
        std::copy_n(g.mean.values().begin() + s * m, m, means.begin() + s * m);
        std::copy_n(g.variance.values().begin() + s * m, m, vars.begin() + s * m);
      }
    }
    const nn::Tensor eps_x = noise(M, m);
    for (std::size_t i = 0; i < M * m; ++i) means[i] += std::sqrt(vars[i]) * eps_x[i];
    x = nn::Tensor::constant({M, m}, std::move(means));
    const auto e = model.emission(x);
    const nn::Tensor yn = e.rsample(noise(M, d));
    for (std::size_t s = 0; s < M; ++s)
      for (std::size_t j = 0; j < d; ++j) result.paths[s].y.push_back(norm.denormalize(yn[s * d + j]));
  }
  return result;
}

std::vector<double> persistence_forecast(const data::TimeSeriesRecord& record, std::size_t context,
                                         std::size_t horizon) {
  require(context >= 1 && context <= record.length(), "persistence: context must lie within the record");
  const std::size_t d = record.dim;
  std::vector<double> out;
  for (std::size_t h = 0; h < horizon; ++h)
    out.insert(out.end(), record.target.begin() + (context - 1) * d, record.target.begin() + context * d);
  return out;
}

double mean_crps(const ForecastResult& f, const data::TimeSeriesRecord& record, std::size_t context,
                 std::span<const double> grid) {
  require(f.dim == 1 && record.dim == 1, "mean_crps: univariate series only");
  require(context + f.horizon <= record.length(), "mean_crps: record too short for the horizon");
  require(f.horizon >= 1, "mean_crps: empty horizon");
  double total = 0.0;
  for (std::size_t t = 0; t < f.horizon; ++t) total += crps(f.samples_at(t), record.target[context + t], grid);
  return total / static_cast<double>(f.horizon);
}

}  // namespace redsds::forecast

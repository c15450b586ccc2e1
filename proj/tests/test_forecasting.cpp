#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "redsds/error.hpp"
#include "redsds/forecasting.hpp"
#include "redsds/param_store.hpp"

using namespace redsds;
using namespace redsds::forecast;

namespace {

std::vector<double> randn(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

struct Fixture {
  model::ModelConfig cfg;
  nn::ParamStore store;
  std::mt19937_64 rng{3};
  std::optional<model::SwitchingModel> model;
  std::optional<inference::InferenceNetwork> net;
  explicit Fixture(model::ModelConfig c) : cfg(c) {
    model.emplace(cfg, store, rng);
    net.emplace(cfg, store, rng);
  }
};

model::ModelConfig small_config() {
  model::ModelConfig c;
  c.num_switches = 3;
  c.max_duration = 6;
  c.state_dim = 2;
  c.transition_hidden = {8};
  c.emission_hidden = {8};
  c.rnn_hidden = 6;
  c.posterior_hidden = {8};
  return c;
}

data::TimeSeriesRecord series(std::vector<double> y) {
  data::TimeSeriesRecord r;
  r.id = 9;
  r.target = std::move(y);
  return r;
}

}  // namespace

TEST(Normalize, ScalingExample) {
  std::vector<double> y{1, 2, 3};
  auto n = normalize(y, Normalization::scaling);
  EXPECT_DOUBLE_EQ(n.scale, 2.0);
  EXPECT_DOUBLE_EQ(n.shift, 0.0);
  EXPECT_NEAR(n.log_det, -std::log(2.0), 1e-15);
  EXPECT_EQ(n.values, (std::vector<double>{0.5, 1.0, 1.5}));
}

TEST(Normalize, StandardizationExample) {
  std::vector<double> y{1, 2, 3};
  auto n = normalize(y, Normalization::standardization);
  EXPECT_DOUBLE_EQ(n.shift, 2.0);
  EXPECT_NEAR(n.scale, std::sqrt(2.0 / 3.0), 1e-15);
  EXPECT_NEAR(n.log_det, -0.5 * std::log(2.0 / 3.0), 1e-15);
  double mean = 0.0, sq = 0.0;
  for (double v : n.values) mean += v, sq += v * v;
  EXPECT_NEAR(mean, 0.0, 1e-14);
  EXPECT_NEAR(sq / 3.0, 1.0, 1e-14);
}

TEST(Normalize, NoneIsIdentity) {
  std::vector<double> y{0.0, -4.0, 7.5};
  auto n = normalize(y, Normalization::none);
  EXPECT_EQ(n.values, y);
  EXPECT_EQ(n.log_det, 0.0);
}

TEST(Normalize, ScaleIsSignSymmetric) {
  std::mt19937_64 rng(1);
  auto y = randn(50, rng, 3.0);
  std::vector<double> neg;
  for (double v : y) neg.push_back(-v);
  EXPECT_DOUBLE_EQ(normalize(y, Normalization::scaling).scale, normalize(neg, Normalization::scaling).scale);
  EXPECT_DOUBLE_EQ(normalize(y, Normalization::standardization).scale,
                   normalize(neg, Normalization::standardization).scale);
}

TEST(Normalize, RoundTrip) {
  std::mt19937_64 rng(2);
  for (auto method : {Normalization::none, Normalization::standardization, Normalization::scaling}) {
    auto y = randn(100, rng, 50.0);
    for (double& v : y) v += 10.0;
    auto n = normalize(y, method);
    auto back = n.denormalize(n.values);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(back[i], y[i], 1e-10);
  }
}

TEST(Normalize, DegenerateSeriesNamed) {
  std::vector<double> flat(5, 3.0), zero(4, 0.0);
  try {
    normalize(flat, Normalization::standardization, "record 17");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("record 17"), std::string::npos);
  }
  EXPECT_THROW(normalize(zero, Normalization::scaling, "record 3"), DataError);
  EXPECT_NO_THROW(normalize(flat, Normalization::scaling));
}

TEST(Normalize, ParseNames) {
  for (auto m : {Normalization::none, Normalization::standardization, Normalization::scaling})
    EXPECT_EQ(parse_normalization(to_string(m)), m);
  EXPECT_THROW(parse_normalization("minmax"), ContractError);
}

TEST(Quantile, RoundsHalfToEven) {
  std::vector<double> s{10, 20, 30, 40, 50};
  EXPECT_EQ(empirical_quantile(s, 0.0), 10);
  EXPECT_EQ(empirical_quantile(s, 1.0), 50);
  EXPECT_EQ(empirical_quantile(s, 0.5), 30);
  EXPECT_EQ(empirical_quantile(s, 0.125), 10);  // position 0.5 rounds to 0
  EXPECT_EQ(empirical_quantile(s, 0.375), 30);  // position 1.5 rounds to 2
  EXPECT_EQ(default_quantile_grid().size(), 19u);
}

TEST(Crps, PointMassAtObservation) {
  std::vector<double> s(40, 2.5);
  EXPECT_EQ(crps(s, 2.5, default_quantile_grid()), 0.0);
  EXPECT_EQ(crps_energy(s, 2.5), 0.0);
}

TEST(Crps, PointMassAwayFromObservation) {
  std::vector<double> s(10, 1.0);
  EXPECT_NEAR(crps_energy(s, 4.0), 3.0, 1e-14);
  // grid form: sum 2 * (alpha - 0) * 3 * 0.05 over alpha = 0.05..0.95
  EXPECT_NEAR(crps(s, 4.0, default_quantile_grid()), 2.85, 1e-12);
}

TEST(Crps, TwoPointDistribution) {
  std::vector<double> s;
  for (int i = 0; i < 1000; ++i) s.push_back(i % 2 == 0 ? 0.0 : 2.0);
  EXPECT_NEAR(crps_energy(s, 1.0), 0.5, 1e-12);
  EXPECT_NEAR(crps(s, 1.0, default_quantile_grid()), 0.5, 0.02);
}

TEST(Crps, TranslationInvariant) {
  std::mt19937_64 rng(4);
  auto s = randn(200, rng);
  const double y = 0.3, base = crps(s, y, default_quantile_grid());
  for (double shift : {-5.0, 2.0, 100.0}) {
    std::vector<double> moved;
    for (double v : s) moved.push_back(v + shift);
    EXPECT_NEAR(crps(moved, y + shift, default_quantile_grid()), base, 1e-10);
    EXPECT_NEAR(crps_energy(moved, y + shift), crps_energy(s, y), 1e-10);
  }
}

TEST(Crps, NonNegativeAndShrinksWithCloserSamples) {
  std::mt19937_64 rng(5);
  auto s = randn(500, rng);
  EXPECT_GE(crps(s, 3.0, default_quantile_grid()), crps(s, 0.0, default_quantile_grid()));
  for (double y : {-3.0, 0.0, 0.5, 2.0}) EXPECT_GE(crps(s, y, default_quantile_grid()), 0.0);
}

TEST(Crps, EnergyFormMatchesPairwiseDefinition) {
  std::mt19937_64 rng(6);
  auto s = randn(60, rng);
  double e1 = 0.0, e2 = 0.0;
  for (double a : s) {
    e1 += std::abs(a - 0.4);
    for (double b : s) e2 += std::abs(a - b);
  }
  const double n = static_cast<double>(s.size());
  EXPECT_NEAR(crps_energy(s, 0.4), e1 / n - 0.5 * e2 / (n * n), 1e-12);
}

TEST(Crps, GridAgreesWithEnergyForm) {
  std::mt19937_64 rng(7);
  std::vector<double> grid;
  for (int i = 1; i <= 999; ++i) grid.push_back(i / 1000.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto s = randn(2000, rng);
    const double y = randn(1, rng)[0];
    EXPECT_NEAR(crps(s, y, grid), crps_energy(s, y), 0.02);
  }
}

TEST(Crps, InvalidGrid) {
  std::vector<double> s{1.0, 2.0};
  EXPECT_THROW(crps(s, 0.0, std::vector<double>{}), ContractError);
  EXPECT_THROW(crps(s, 0.0, std::vector<double>{0.5, 0.2}), ContractError);
  EXPECT_THROW(crps(s, 0.0, std::vector<double>{0.0, 0.5}), ContractError);
  EXPECT_THROW(crps(std::vector<double>{}, 0.0, default_quantile_grid()), ContractError);
}

TEST(Forecast, ZeroHorizon) {
  Fixture f(small_config());
  std::mt19937_64 rng(8);
  auto r = series(randn(20, rng));
  ForecastOptions o;
  o.num_paths = 5;
  auto res = forecast_unroll(*f.model, *f.net, r, 20, o);
  EXPECT_EQ(res.horizon, 0u);
  for (const auto& p : res.paths) EXPECT_TRUE(p.y.empty());
  EXPECT_TRUE(res.mean().empty());
}

TEST(Forecast, LinearRecursionWithoutNoise) {
  model::ModelConfig c;
  c.num_switches = 1;
  c.max_duration = 1;
  c.state_dim = 1;
  c.nonlinear_transition = false;
  c.nonlinear_emission = false;
  c.rnn_hidden = 4;
  c.posterior_hidden = {4};
  Fixture f(c);
  f.store.assign("gen.transition.0.l0.weight", std::vector<double>{0.9});
  f.store.assign("gen.emission.l0.weight", std::vector<double>{2.0});
  std::mt19937_64 rng(9);
  const std::size_t T = 12, H = 6;
  auto r = series(randn(T, rng));
  ForecastOptions o;
  o.horizon = H;
  o.num_paths = 3;
  o.sample_noise = false;
  auto res = forecast_unroll(*f.model, *f.net, r, T, o);

  nn::NoGradGuard guard;
  auto s = f.net->sample(nn::Tensor::constant({T, 1}, r.target), {}, nn::Tensor::zeros({T, 1}), T, 1);
  double x = s.mean[T - 1];
  for (std::size_t h = 0; h < H; ++h) {
    x *= 0.9;
    for (const auto& p : res.paths) EXPECT_NEAR(p.y[h], 2.0 * x, 1e-12);
  }
}

TEST(Forecast, PathStructure) {
  auto c = small_config();
  c.min_duration = 2;
  Fixture f(c);
  std::mt19937_64 rng(10);
  auto r = series(randn(30, rng));
  ForecastOptions o;
  o.horizon = 15;
  o.num_paths = 40;
  o.seed = 11;
  auto res = forecast_unroll(*f.model, *f.net, r, 25, o);
  ASSERT_EQ(res.paths.size(), 40u);
  for (const auto& p : res.paths) {
    ASSERT_EQ(p.y.size(), 15u);
    ASSERT_EQ(p.z.size(), 16u);
    for (double v : p.y) EXPECT_TRUE(std::isfinite(v));
    for (std::size_t h = 0; h < p.c.size(); ++h) {
      EXPECT_GE(p.c[h], 1u);
      EXPECT_LE(p.c[h], c.max_duration);
      EXPECT_GE(p.z[h], 0);
      EXPECT_LT(p.z[h], 3);
      if (h == 0) continue;
      // counts either advance within a segment or restart
      if (p.c[h] == 1) {
        EXPECT_GE(p.c[h - 1], c.min_duration);
      } else {
        EXPECT_EQ(p.c[h], p.c[h - 1] + 1);
        EXPECT_EQ(p.z[h], p.z[h - 1]);
      }
    }
  }
  auto q = res.quantiles(default_quantile_grid());
  for (std::size_t l = 1; l < q.size(); ++l)
    for (std::size_t t = 0; t < 15; ++t) EXPECT_LE(q[l - 1][t], q[l][t]);
  // identical seed reproduces the paths
  auto again = forecast_unroll(*f.model, *f.net, r, 25, o);
  for (std::size_t s = 0; s < 40; ++s) EXPECT_EQ(again.paths[s].y, res.paths[s].y);
}

TEST(Forecast, NormalizationScalesPaths) {
  auto c = small_config();
  Fixture f(c);
  std::mt19937_64 rng(12);
  auto r = series(randn(20, rng));
  for (double& v : r.target) v = 5.0 + v;
  ForecastOptions o;
  o.horizon = 4;
  o.num_paths = 8;
  o.sample_noise = false;
  o.normalization = Normalization::scaling;
  auto res = forecast_unroll(*f.model, *f.net, r, 20, o);
  auto scaled = r;
  for (double& v : scaled.target) v *= 3.0;
  auto res3 = forecast_unroll(*f.model, *f.net, scaled, 20, o);
  for (std::size_t s = 0; s < 8; ++s)
    for (std::size_t h = 0; h < 4; ++h) EXPECT_NEAR(res3.paths[s].y[h], 3.0 * res.paths[s].y[h], 1e-9);
}

TEST(Forecast, ControlsMustCoverHorizon) {
  auto c = small_config();
  c.controls_enabled = true;
  c.time_feature_dim = 2;
  c.control_dim = 4;
  c.control_hidden = 6;
  c.duration_hidden = 6;
  Fixture f(c);
  std::mt19937_64 rng(13);
  auto r = series(randn(10, rng));
  r.controls = data::RecordControls{0, 2, randn(20, rng)};
  ForecastOptions o;
  o.horizon = 3;
  o.num_paths = 2;
  EXPECT_THROW(forecast_unroll(*f.model, *f.net, r, 10, o), DataError);
  auto ok = forecast_unroll(*f.model, *f.net, r, 7, o);
  EXPECT_EQ(ok.paths[0].y.size(), 3u);
  r.controls.reset();
  EXPECT_THROW(forecast_unroll(*f.model, *f.net, r, 7, o), DataError);
}

TEST(Forecast, Persistence) {
  auto r = series({1.0, 4.0, 2.0, 8.0});
  EXPECT_EQ(persistence_forecast(r, 3, 2), (std::vector<double>{2.0, 2.0}));
  EXPECT_THROW(persistence_forecast(r, 0, 2), ContractError);
  ForecastResult f;
  f.horizon = 1;
  f.dim = 1;
  f.paths.push_back({{8.0}, {0, 0}, {1, 2}});
  EXPECT_EQ(mean_crps(f, r, 3, default_quantile_grid()), 0.0);
}

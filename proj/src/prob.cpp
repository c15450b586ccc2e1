#include "redsds/prob.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "redsds/error.hpp"

namespace redsds::prob {

namespace {
const double kLog2Pi = std::log(2.0 * std::numbers::pi);
}

nn::Tensor positive_variance(const nn::Tensor& raw) { return nn::softplus(raw) + kVarianceFloor; }

std::vector<double> tempered_softmax(std::span<const double> logits, double tau) {
  require(tau > 0.0, "tempered_softmax: temperature must be positive");
  require(!logits.empty(), "tempered_softmax: empty logits");
  for (double o : logits) require(!std::isnan(o), "tempered_softmax: NaN logit");
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - mx) / tau);
    s += out[i];
  }
  for (double& p : out) p /= s;
  return out;
}

nn::Tensor tempered_log_softmax(const nn::Tensor& logits, double tau) {
  require(tau > 0.0, "tempered_log_softmax: temperature must be positive");
  return nn::log_softmax_last(tau == 1.0 ? logits : nn::mul_scalar(logits, 1.0 / tau));
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : values) s += std::exp(v - mx);
  return mx + std::log(s);
}

nn::Tensor DiagGaussian::log_prob(const nn::Tensor& v) const {
  if (v.shape() != mean.shape() || variance.shape() != mean.shape())
    throw ContractError("gaussian log_prob: shape mismatch " + nn::shape_str(v.shape()) + " vs " + nn::shape_str(mean.shape()));
  const std::size_t n = mean.cols(), rows = mean.numel() / n;
  const auto vv = v.values(), mv = mean.values(), sv = variance.values();
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t i = r * n; i < (r + 1) * n; ++i) {
      const double d = vv[i] - mv[i];
      acc += kLog2Pi + std::log(sv[i]) + d * d / sv[i];
    }
    out[r] = -0.5 * acc;
  }
  nn::Shape shape = mean.rank() == 1 ? nn::Shape{1} : nn::Shape{rows};
  return nn::make_op(std::move(shape), std::move(out), {v, mean, variance}, [n, rows](nn::Node& self) {
    nn::Node& pv = *self.parents[0];
    nn::Node& pm = *self.parents[1];
    nn::Node& ps = *self.parents[2];
    for (std::size_t r = 0; r < rows; ++r) {
      const double g = self.grad[r];
      for (std::size_t i = r * n; i < (r + 1) * n; ++i) {
        const double s2 = ps.value[i];
        const double d = pv.value[i] - pm.value[i];
        const double z = d / s2;
        if (pv.requires_grad) pv.grad[i] -= g * z;
        if (pm.requires_grad) pm.grad[i] += g * z;
        if (ps.requires_grad) ps.grad[i] += g * 0.5 * (z * z - 1.0 / s2);
      }
    }
  });
}

nn::Tensor DiagGaussian::rsample(const nn::Tensor& noise) const {
  require(noise.shape() == mean.shape(), "gaussian rsample: noise shape mismatch");
  return mean + nn::sqrt(variance) * noise;
}

double gaussian_log_prob(std::span<const double> mean, std::span<const double> variance,
                         std::span<const double> v) {
  require(mean.size() == v.size() && variance.size() == v.size(), "gaussian_log_prob: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - mean[i];
    s += -0.5 * (kLog2Pi + std::log(variance[i]) + d * d / variance[i]);
  }
  return s;
}

CategoricalDist CategoricalDist::from_probs(std::span<const double> probs) {
  CategoricalDist c;
  c.log_probs.reserve(probs.size());
  for (double p : probs) c.log_probs.push_back(p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity());
  const double z = log_sum_exp(c.log_probs);
  for (double& lp : c.log_probs) lp -= z;
  return c;
}

CategoricalDist CategoricalDist::from_logits(std::span<const double> logits) {
  CategoricalDist c;
  const double z = log_sum_exp(logits);
  for (double o : logits) c.log_probs.push_back(o - z);
  return c;
}

std::size_t CategoricalDist::sample(double uniform) const {
  std::vector<double> w(log_probs.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_probs[i]);
  return sample_index(w, uniform);
}

std::size_t sample_index(std::span<const double> weights, double uniform) {
  require(!weights.empty(), "sample_index: empty distribution");
  double total = 0.0;
  for (double w : weights) total += w;
  require(total > 0.0, "sample_index: distribution has no mass");
  const double target = uniform * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = i;
    acc += weights[i];
    if (target < acc) return i;
  }
  return last_positive;
}

}  // namespace redsds::prob

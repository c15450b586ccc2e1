#pragma once

#include <span>
#include <vector>

#include "redsds/tensor.hpp"

namespace redsds::prob {

inline constexpr double kVarianceFloor = 1e-6;

// softplus(raw) + kVarianceFloor: maps unconstrained network outputs to variances.
nn::Tensor positive_variance(const nn::Tensor& raw);

// exp(o_i / tau) / sum_j exp(o_j / tau), via max subtraction.
std::vector<double> tempered_softmax(std::span<const double> logits, double tau);
// Row-wise tempered log-softmax over the last axis of a tensor.
nn::Tensor tempered_log_softmax(const nn::Tensor& logits, double tau);

double log_sum_exp(std::span<const double> values);

// Factorized Gaussian; each row of mean/variance is one distribution.
struct DiagGaussian {
  nn::Tensor mean;
  nn::Tensor variance;

  // Per-row log density of v: [rows, n] -> [rows].
  nn::Tensor log_prob(const nn::Tensor& v) const;
  // mean + sqrt(variance) * noise; differentiable in mean and variance.
  nn::Tensor rsample(const nn::Tensor& noise) const;
};

// Plain-value helpers for single vectors.
double gaussian_log_prob(std::span<const double> mean, std::span<const double> variance,
                         std::span<const double> v);

// Log-probabilities normalized in log space.
struct CategoricalDist {
  std::vector<double> log_probs;

  static CategoricalDist from_probs(std::span<const double> probs);
  static CategoricalDist from_logits(std::span<const double> logits);
  std::size_t size() const { return log_probs.size(); }
  // Inverse-CDF draw given u in [0, 1).
  std::size_t sample(double uniform) const;
};

// Inverse-CDF sampling over unnormalized nonnegative weights.
std::size_t sample_index(std::span<const double> weights, double uniform);

}  // namespace redsds::prob

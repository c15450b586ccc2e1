#pragma once

// Exact inference over (switch, count) pairs given per-step conditional
// likelihoods. Time and switch indices are 0-based; count arguments of the
// accessors are 1-based (count c lives at storage index c - 1).
//
// Cost of forward/backward is O(T K (K + D)) where D = d_max: the reset mass
// entering each step and the reset continuation of the backward pass are
// summed once per (t, z) instead of once per (t, z, c).

#include <cstddef>
#include <vector>

#include "redsds/tensor.hpp"

namespace redsds::hsmm {

struct DPInputs {
  std::size_t T = 0;  // sequence length
  std::size_t K = 0;  // switches
  std::size_t D = 0;  // d_max
  std::vector<double> log_pi;   // [K]
  std::vector<double> b;        // [T, K]: log p(y_t, x_t | x_{t-1}, z_t = k) (t = 0 uses the initial prior)
  std::vector<double> log_A;    // [T, K, K]: row i = log p(z_t = . | z_{t-1} = i, reset); slice 0 unused
  std::vector<double> log_v;    // [K, D] static or [T, K, D]: log increment probability
  std::vector<double> log_1mv;  // same layout: log reset probability

  bool time_varying_durations() const { return log_v.size() == T * K * D && T > 1; }
  double lv(std::size_t t, std::size_t k, std::size_t c0) const {
    return log_v[duration_offset(t) + k * D + c0];
  }
  double l1mv(std::size_t t, std::size_t k, std::size_t c0) const {
    return log_1mv[duration_offset(t) + k * D + c0];
  }
  double la(std::size_t t, std::size_t from, std::size_t to) const { return log_A[(t * K + from) * K + to]; }
  std::size_t duration_offset(std::size_t t) const { return time_varying_durations() ? t * K * D : 0; }

  // Checks sizes, row normalization of log_A (t >= 1) and
  // exp(log_v) + exp(log_1mv) = 1 (tolerance 1e-9). Throws ContractError.
  void validate() const;
};

struct ForwardResult {
  std::vector<double> log_alpha;  // [T, K, D]
  double loglik = 0.0;
};

struct DiscretePosterior {
  std::size_t T = 0, K = 0, D = 0;
  std::vector<double> log_alpha;  // [T, K, D]
  std::vector<double> log_beta;   // [T, K, D]
  std::vector<double> gamma;      // [T, K, D] probabilities
  double loglik = 0.0;

  std::size_t index(std::size_t t, std::size_t z, std::size_t count) const { return (t * K + z) * D + (count - 1); }
  double gamma_at(std::size_t t, std::size_t z, std::size_t count) const { return gamma[index(t, z, count)]; }
  // Count-marginalized switch posterior: [T, K].
  std::vector<double> switch_marginals() const;
};

ForwardResult forward(const DPInputs& dp);
std::vector<double> backward(const DPInputs& dp);
// gamma[t] = exp(log_alpha[t] + log_beta[t] - loglik)
std::vector<double> smooth(const std::vector<double>& log_alpha, const std::vector<double>& log_beta, double loglik);
DiscretePosterior posterior(const DPInputs& dp);

// Gradient of loglik with respect to every entry of the inputs; these are
// posterior expectations of the corresponding indicator events.
struct DPGradients {
  std::vector<double> log_pi, b, log_A, log_v, log_1mv;
};
DPGradients loglik_gradients(const DPInputs& dp, const DiscretePosterior& post);

// Differentiable batched likelihood. Rows are time-major (row t * B + s).
//   log_pi:  [K]
//   b:       [T * B, K]
//   log_A:   [(T - 1) * B, K * K] (undefined when T == 1)
//   log_v, log_1mv: [1, K * D] shared by all steps, or [T * B, K * D]
// Returns [B] log-likelihoods.
struct DPTensors {
  nn::Tensor log_pi, b, log_A, log_v, log_1mv;
};
nn::Tensor loglik(const DPTensors& tensors, std::size_t T, std::size_t B, std::size_t D);

// Plain DP inputs of series `s` from batched tensors.
DPInputs extract(const DPTensors& tensors, std::size_t T, std::size_t B, std::size_t D, std::size_t s);

}  // namespace redsds::hsmm

#pragma once

// Reference implementations of the (switch, count) likelihood used to check
// the linear-time recursions. Both are exponential or quadratic in the count
// range and only meant for small instances.

#include <vector>

#include "redsds/hsmm.hpp"

namespace redsds::hsmm {

// Refuses instances with (K * D)^T above this many paths.
inline constexpr double kMaxEnumeratedPaths = 1e7;

// Enumerates every (z, c) path with nonzero prior probability.
double brute_force_loglik(const DPInputs& dp);
// Path-sum marginals per (t, z, c), layout [T, K, D].
std::vector<double> brute_force_posterior(const DPInputs& dp);

// Standard HMM forward-backward over the K * D "meta switch" (z, c) with an
// explicit (KD x KD) transition per step: O(T K^2 D^2).
struct MetaSwitchResult {
  double loglik = 0.0;
  std::vector<double> gamma;  // [T, K, D]
};
MetaSwitchResult meta_switch_inference(const DPInputs& dp);

}  // namespace redsds::hsmm

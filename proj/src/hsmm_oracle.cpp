#include "redsds/hsmm_oracle.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include "redsds/error.hpp"
#include "redsds/prob.hpp"

namespace redsds::hsmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_size(const DPInputs& dp) {
  dp.validate();
  const double paths = std::pow(static_cast<double>(dp.K * dp.D), static_cast<double>(dp.T));
  if (paths > kMaxEnumeratedPaths) throw ContractError("brute force: instance too large to enumerate");
}

// Calls visit(log_weight, path) for every complete path; path[t] = (z, c0).
void enumerate(const DPInputs& dp,
               const std::function<void(double, const std::vector<std::pair<std::size_t, std::size_t>>&)>& visit) {
  std::vector<std::pair<std::size_t, std::size_t>> path(dp.T);
  std::function<void(std::size_t, double)> rec = [&](std::size_t t, double w) {
    if (w == kNegInf) return;
    if (t == dp.T) {
      visit(w, path);
      return;
    }
    const auto [zp, cp] = path[t - 1];
    // increment: keep the switch, count + 1
    if (cp + 1 < dp.D) {
      path[t] = {zp, cp + 1};
      rec(t + 1, w + dp.lv(t, zp, cp) + dp.b[t * dp.K + zp]);
    }
    // reset: Markov transition of the switch, count back to 1
    for (std::size_t z = 0; z < dp.K; ++z) {
      path[t] = {z, 0};
      rec(t + 1, w + dp.l1mv(t, zp, cp) + dp.la(t, zp, z) + dp.b[t * dp.K + z]);
    }
  };
  for (std::size_t z = 0; z < dp.K; ++z) {
    path[0] = {z, 0};
    rec(1, dp.log_pi[z] + dp.b[z]);
  }
}

}  // namespace

double brute_force_loglik(const DPInputs& dp) {
  check_size(dp);
  std::vector<double> weights;
  enumerate(dp, [&](double w, const auto&) { weights.push_back(w); });
  return prob::log_sum_exp(weights);
}

std::vector<double> brute_force_posterior(const DPInputs& dp) {
  const double L = brute_force_loglik(dp);
  std::vector<double> gamma(dp.T * dp.K * dp.D, 0.0);
  enumerate(dp, [&](double w, const auto& path) {
    const double p = std::exp(w - L);
    for (std::size_t t = 0; t < dp.T; ++t) gamma[(t * dp.K + path[t].first) * dp.D + path[t].second] += p;
  });
  return gamma;
}

MetaSwitchResult meta_switch_inference(const DPInputs& dp) {
  dp.validate();
  const std::size_t T = dp.T, K = dp.K, D = dp.D, S = K * D;
  auto state = [D](std::size_t z, std::size_t c) { return z * D + c; };

  // trans[t][from * S + to] = log p((z_t, c_t) = to | (z_{t-1}, c_{t-1}) = from)
  std::vector<std::vector<double>> trans(T, std::vector<double>(S * S, kNegInf));
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t zp = 0; zp < K; ++zp) {
      for (std::size_t cp = 0; cp < D; ++cp) {
        const std::size_t from = state(zp, cp);
        for (std::size_t z = 0; z < K; ++z) {
          for (std::size_t c = 0; c < D; ++c) {
            double lp = kNegInf;
            if (c == 0) {
              lp = dp.l1mv(t, zp, cp) + dp.la(t, zp, z);
            } else if (c == cp + 1 && z == zp) {
              lp = dp.lv(t, zp, cp);
            }
            trans[t][from * S + state(z, c)] = lp;
          }
        }
      }
    }
  }

  std::vector<double> alpha(T * S, kNegInf), beta(T * S, 0.0);
  for (std::size_t z = 0; z < K; ++z) alpha[state(z, 0)] = dp.log_pi[z] + dp.b[z];
  std::vector<double> terms(S);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t to = 0; to < S; ++to) {
      for (std::size_t from = 0; from < S; ++from) terms[from] = alpha[(t - 1) * S + from] + trans[t][from * S + to];
      alpha[t * S + to] = prob::log_sum_exp(terms) + dp.b[t * K + to / D];
    }
  }
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t from = 0; from < S; ++from) {
      for (std::size_t to = 0; to < S; ++to)
        terms[to] = trans[t + 1][from * S + to] + dp.b[(t + 1) * K + to / D] + beta[(t + 1) * S + to];
      beta[t * S + from] = prob::log_sum_exp(terms);
    }
  }
  MetaSwitchResult r;
  r.loglik = prob::log_sum_exp(std::span<const double>(alpha.data() + (T - 1) * S, S));
  r.gamma.resize(T * S);
  for (std::size_t i = 0; i < T * S; ++i) r.gamma[i] = std::exp(alpha[i] + beta[i] - r.loglik);
  return r;
}

}  // namespace redsds::hsmm

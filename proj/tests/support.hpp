#pragma once

// Independent reference computations shared by the unit and acceptance tests.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "redsds/hsmm.hpp"
#include "redsds/param_store.hpp"
#include "redsds/prob.hpp"

namespace support {

inline double logsumexp(const std::vector<double>& v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (mx == -std::numeric_limits<double>::infinity()) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

inline std::vector<double> random_simplex(std::size_t n, std::mt19937_64& rng, double zero_prob = 0.0) {
  std::gamma_distribution<double> g(1.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(n);
  double s = 0.0;
  for (double& x : p) {
    x = u(rng) < zero_prob ? 0.0 : g(rng) + 1e-3;
    s += x;
  }
  if (s == 0.0) {
    p[0] = 1.0;
    s = 1.0;
  }
  for (double& x : p) x /= s;
  return p;
}

// Increment probabilities from a duration distribution over 1..D, written
// directly from v(c) = 1 - rho(c) / sum_{d >= c} rho(d).
inline std::vector<double> increments_from_durations(const std::vector<double>& rho) {
  const std::size_t D = rho.size();
  std::vector<double> v(D);
  for (std::size_t c = 1; c <= D; ++c) {
    double tail = 0.0;
    for (std::size_t d = c; d <= D; ++d) tail += rho[d - 1];
    v[c - 1] = tail > 0.0 ? 1.0 - rho[c - 1] / tail : 1.0;
  }
  v[D - 1] = 0.0;
  return v;
}

inline double safe_log(double p) { return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity(); }

// Random DP instance; durations put zero mass below d_min.
inline redsds::hsmm::DPInputs random_dp(std::size_t T, std::size_t K, std::size_t d_min, std::size_t D,
                                        std::mt19937_64& rng, bool time_varying = false) {
  redsds::hsmm::DPInputs dp;
  dp.T = T;
  dp.K = K;
  dp.D = D;
  std::normal_distribution<double> normal(0.0, 1.5);
  for (double p : random_simplex(K, rng)) dp.log_pi.push_back(std::log(p));
  for (std::size_t i = 0; i < T * K; ++i) dp.b.push_back(normal(rng));
  dp.log_A.assign(T * K * K, 0.0);
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t i = 0; i < K; ++i) {
      const auto row = random_simplex(K, rng);
      for (std::size_t j = 0; j < K; ++j) dp.log_A[(t * K + i) * K + j] = std::log(row[j]);
    }
  const std::size_t blocks = time_varying ? T : 1;
  for (std::size_t t = 0; t < blocks; ++t)
    for (std::size_t k = 0; k < K; ++k) {
      std::vector<double> rho(D, 0.0);
      const auto valid = random_simplex(D - d_min + 1, rng, 0.2);
      for (std::size_t d = d_min; d <= D; ++d) rho[d - 1] = valid[d - d_min];
      const auto v = increments_from_durations(rho);
      for (std::size_t c = 0; c < D; ++c) {
        dp.log_v.push_back(safe_log(v[c]));
        dp.log_1mv.push_back(safe_log(1.0 - v[c]));
      }
    }
  return dp;
}

// Scaled probability-space forward-backward for an HMM with per-step
// transition matrices (trans[t][i][j] for t >= 1) and emission log-likelihoods.
struct HmmResult {
  double loglik = 0.0;
  std::vector<double> gamma;  // [T, K]
};

inline HmmResult textbook_hmm(const std::vector<double>& pi, const std::vector<std::vector<double>>& trans,
                              const std::vector<double>& log_emission, std::size_t T, std::size_t K) {
  // Emissions are rescaled per step by their max to stay in range.
  std::vector<double> e(T * K), shift(T);
  for (std::size_t t = 0; t < T; ++t) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) mx = std::max(mx, log_emission[t * K + k]);
    shift[t] = mx;
    for (std::size_t k = 0; k < K; ++k) e[t * K + k] = std::exp(log_emission[t * K + k] - mx);
  }
  std::vector<double> alpha(T * K), beta(T * K, 1.0), scale(T);
  for (std::size_t t = 0; t < T; ++t) {
    double s = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
      double a = 0.0;
      if (t == 0) {
        a = pi[j];
      } else {
        for (std::size_t i = 0; i < K; ++i) a += alpha[(t - 1) * K + i] * trans[t][i * K + j];
      }
      alpha[t * K + j] = a * e[t * K + j];
      s += alpha[t * K + j];
    }
    scale[t] = s;
    for (std::size_t j = 0; j < K; ++j) alpha[t * K + j] /= s;
  }
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t i = 0; i < K; ++i) {
      double b = 0.0;
      for (std::size_t j = 0; j < K; ++j) b += trans[t + 1][i * K + j] * e[(t + 1) * K + j] * beta[(t + 1) * K + j];
      beta[t * K + i] = b / scale[t + 1];
    }
  }
  HmmResult r;
  for (std::size_t t = 0; t < T; ++t) r.loglik += std::log(scale[t]) + shift[t];
  r.gamma.resize(T * K);
  for (std::size_t i = 0; i < T * K; ++i) r.gamma[i] = alpha[i] * beta[i];
  return r;
}

// Marginal log-likelihood of y_{1:T} under
//   x_1 ~ N(mu1, P1), x_t = F x_{t-1} + w, w ~ N(0, Q), y_t = H x_t + v, v ~ N(0, R)
// via the Kalman filter's innovation decomposition.
inline double kalman_loglik(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& P1, const Eigen::MatrixXd& F,
                            const Eigen::MatrixXd& Q, const Eigen::MatrixXd& H, const Eigen::MatrixXd& R,
                            const std::vector<Eigen::VectorXd>& y) {
  Eigen::VectorXd mean = mu1;
  Eigen::MatrixXd cov = P1;
  double ll = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (t > 0) {
      mean = F * mean;
      cov = F * cov * F.transpose() + Q;
    }
    const Eigen::VectorXd innov = y[t] - H * mean;
    const Eigen::MatrixXd S = H * cov * H.transpose() + R;
    const Eigen::LLT<Eigen::MatrixXd> llt(S);
    const Eigen::MatrixXd L = llt.matrixL();
    const double logdet = 2.0 * L.diagonal().array().log().sum();
    const Eigen::VectorXd sol = llt.solve(innov);
    ll += -0.5 * (static_cast<double>(y[t].size()) * std::log(2.0 * std::numbers::pi) + logdet + innov.dot(sol));
    const Eigen::MatrixXd gain = cov * H.transpose() * llt.solve(Eigen::MatrixXd::Identity(S.rows(), S.cols()));
    mean = mean + gain * innov;
    cov = (Eigen::MatrixXd::Identity(cov.rows(), cov.cols()) - gain * H) * cov;
  }
  return ll;
}

// Linear-Gaussian model read off a K = 1, d_max = 1 model with linear heads:
// x_t = W^T x_{t-1} + w, y_t = We^T x_t + v, with softplus variances.
struct Lgssm {
  Eigen::VectorXd mu1;
  Eigen::MatrixXd P1, F, Q, H, R;

  double loglik(const std::vector<double>& y, std::size_t T) const {
    const auto d = static_cast<Eigen::Index>(H.rows());
    std::vector<Eigen::VectorXd> obs;
    for (std::size_t t = 0; t < T; ++t) obs.push_back(Eigen::Map<const Eigen::VectorXd>(y.data() + t * d, d));
    return kalman_loglik(mu1, P1, F, Q, H, R, obs);
  }
};

inline Lgssm lgssm_from_params(const redsds::nn::ParamStore& store, std::size_t m, std::size_t d) {
  auto var = [](double raw) { return std::log1p(std::exp(raw)) + redsds::prob::kVarianceFloor; };
  const auto& W = store.get("gen.transition.0.l0.weight");
  const auto& We = store.get("gen.emission.l0.weight");
  const auto& mu = store.get("gen.init.mean");
  const auto& init_raw = store.get("gen.init.raw_var");
  const auto& rt = store.get("gen.transition.0.raw_var");
  const auto& re = store.get("gen.emission.raw_var");
  const auto M = static_cast<Eigen::Index>(m), Dd = static_cast<Eigen::Index>(d);
  Lgssm g;
  g.mu1.resize(M);
  g.P1 = Eigen::MatrixXd::Zero(M, M);
  g.Q = Eigen::MatrixXd::Zero(M, M);
  g.F.resize(M, M);
  g.H.resize(Dd, M);
  g.R = Eigen::MatrixXd::Zero(Dd, Dd);
  for (Eigen::Index i = 0; i < M; ++i) {
    g.mu1(i) = mu[i];
    g.P1(i, i) = var(init_raw[i]);
    g.Q(i, i) = var(rt[i]);
    for (Eigen::Index j = 0; j < M; ++j) g.F(i, j) = W.at(j, i);
    for (Eigen::Index j = 0; j < Dd; ++j) g.H(j, i) = We.at(i, j);
  }
  for (Eigen::Index j = 0; j < Dd; ++j) g.R(j, j) = var(re[j]);
  return g;
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace support

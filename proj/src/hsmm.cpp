#include "redsds/hsmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "redsds/error.hpp"

namespace redsds::hsmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double logaddexp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double mx = std::max(a, b);
  return mx + std::log1p(std::exp(-std::abs(a - b)));
}

// Streaming log-sum-exp accumulator.
struct Lse {
  double mx = kNegInf;
  double s = 0.0;
  void add(double v) {
    if (v == kNegInf) return;
    if (v <= mx) {
      s += std::exp(v - mx);
    } else {
      s = s * std::exp(mx - v) + 1.0;
      mx = v;
    }
  }
  double value() const { return mx == kNegInf ? kNegInf : mx + std::log(s); }
};

}  // namespace

void DPInputs::validate() const {
  require(T >= 1 && K >= 1 && D >= 1, "DPInputs: T, K and D must be positive");
  require(log_pi.size() == K, "DPInputs: log_pi must have K entries");
  require(b.size() == T * K, "DPInputs: b must be T x K");
  require(log_A.size() == T * K * K, "DPInputs: log_A must be T x K x K");
  require(log_v.size() == log_1mv.size(), "DPInputs: log_v and log_1mv layouts differ");
  require(log_v.size() == K * D || log_v.size() == T * K * D, "DPInputs: duration tables must be K x D or T x K x D");
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t i = 0; i < K; ++i) {
      Lse row;
      for (std::size_t j = 0; j < K; ++j) row.add(la(t, i, j));
      if (!(std::abs(row.value()) < 1e-9))
        throw ContractError("DPInputs: log_A row not normalized at t=" + std::to_string(t));
    }
  }
  for (std::size_t i = 0; i < log_v.size(); ++i) {
    require(std::abs(std::exp(log_v[i]) + std::exp(log_1mv[i]) - 1.0) < 1e-9,
            "DPInputs: increment and reset probabilities do not sum to one");
  }
}

std::vector<double> DiscretePosterior::switch_marginals() const {
  std::vector<double> out(T * K, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t z = 0; z < K; ++z)
      for (std::size_t c = 0; c < D; ++c) out[t * K + z] += gamma[(t * K + z) * D + c];
  return out;
}

ForwardResult forward(const DPInputs& dp) {
  const std::size_t T = dp.T, K = dp.K, D = dp.D;
  require(T >= 1, "forward: empty sequence");
  for (double v : dp.b) {
    if (!std::isfinite(v)) throw NumericError("forward: non-finite conditional log-likelihood");
  }
  ForwardResult out;
  auto& alpha = out.log_alpha;
  alpha.assign(T * K * D, kNegInf);
  for (std::size_t z = 0; z < K; ++z) alpha[z * D] = dp.log_pi[z] + dp.b[z];

  std::vector<double> reset_mass(K);
  for (std::size_t t = 1; t < T; ++t) {
    const double* prev = alpha.data() + (t - 1) * K * D;
    double* cur = alpha.data() + t * K * D;
    for (std::size_t z = 0; z < K; ++z) {
      Lse r;
      for (std::size_t c = 0; c < D; ++c) r.add(dp.l1mv(t, z, c) + prev[z * D + c]);
      reset_mass[z] = r.value();
    }
    for (std::size_t z = 0; z < K; ++z) {
      const double bz = dp.b[t * K + z];
      Lse in;
      for (std::size_t zp = 0; zp < K; ++zp) in.add(dp.la(t, zp, z) + reset_mass[zp]);
      cur[z * D] = bz + in.value();
      for (std::size_t c = 1; c < D; ++c) {
        const double p = prev[z * D + c - 1];
        if (p == kNegInf) continue;
        cur[z * D + c] = bz + dp.lv(t, z, c - 1) + p;
      }
    }
  }
  Lse total;
  for (std::size_t i = 0; i < K * D; ++i) total.add(alpha[(T - 1) * K * D + i]);
  out.loglik = total.value();
  if (!std::isfinite(out.loglik)) throw NumericError("forward: log-likelihood is not finite");
  return out;
}

namespace {

// S[t][z] = logsumexp_j log_A[t+1][z][j] + b[t+1][j] + beta[t+1][j][1]
void reset_continuation(const DPInputs& dp, const std::vector<double>& beta, std::size_t t_next,
                        std::vector<double>& out) {
  const std::size_t K = dp.K, D = dp.D;
  std::vector<double> g(K);
  for (std::size_t j = 0; j < K; ++j) g[j] = dp.b[t_next * K + j] + beta[(t_next * K + j) * D];
  for (std::size_t z = 0; z < K; ++z) {
    Lse s;
    for (std::size_t j = 0; j < K; ++j) s.add(dp.la(t_next, z, j) + g[j]);
    out[z] = s.value();
  }
}

}  // namespace

std::vector<double> backward(const DPInputs& dp) {
  const std::size_t T = dp.T, K = dp.K, D = dp.D;
  std::vector<double> beta(T * K * D, kNegInf);
  std::fill(beta.begin() + (T - 1) * K * D, beta.end(), 0.0);
  std::vector<double> cont(K);
  for (std::size_t tt = T - 1; tt-- > 0;) {
    const std::size_t t1 = tt + 1;
    reset_continuation(dp, beta, t1, cont);
    for (std::size_t z = 0; z < K; ++z) {
      const double bz = dp.b[t1 * K + z];
      for (std::size_t c = 0; c < D; ++c) {
        double v = dp.l1mv(t1, z, c) + cont[z];
        if (c + 1 < D) v = logaddexp(v, dp.lv(t1, z, c) + bz + beta[(t1 * K + z) * D + c + 1]);
        beta[(tt * K + z) * D + c] = v;
      }
    }
  }
  return beta;
}

std::vector<double> smooth(const std::vector<double>& log_alpha, const std::vector<double>& log_beta, double loglik) {
  require(log_alpha.size() == log_beta.size(), "smooth: alpha and beta sizes differ");
  std::vector<double> gamma(log_alpha.size());
  for (std::size_t i = 0; i < gamma.size(); ++i) gamma[i] = std::exp(log_alpha[i] + log_beta[i] - loglik);
  return gamma;
}

DiscretePosterior posterior(const DPInputs& dp) {
  DiscretePosterior post;
  post.T = dp.T;
  post.K = dp.K;
  post.D = dp.D;
  auto fwd = forward(dp);
  post.log_alpha = std::move(fwd.log_alpha);
  post.loglik = fwd.loglik;
  post.log_beta = backward(dp);
  post.gamma = smooth(post.log_alpha, post.log_beta, post.loglik);
  return post;
}

DPGradients loglik_gradients(const DPInputs& dp, const DiscretePosterior& post) {
  const std::size_t T = dp.T, K = dp.K, D = dp.D;
  const double L = post.loglik;
  const auto& alpha = post.log_alpha;
  const auto& beta = post.log_beta;
  DPGradients g;
  g.log_pi.assign(K, 0.0);
  g.b.assign(T * K, 0.0);
  g.log_A.assign(T * K * K, 0.0);
  g.log_v.assign(dp.log_v.size(), 0.0);
  g.log_1mv.assign(dp.log_1mv.size(), 0.0);

  for (std::size_t z = 0; z < K; ++z) g.log_pi[z] = post.gamma[z * D];
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t z = 0; z < K; ++z)
      for (std::size_t c = 0; c < D; ++c) g.b[t * K + z] += post.gamma[(t * K + z) * D + c];

  std::vector<double> reset_mass(K), cont(K);
  for (std::size_t t = 1; t < T; ++t) {
    const double* prev = alpha.data() + (t - 1) * K * D;
    for (std::size_t z = 0; z < K; ++z) {
      Lse r;
      for (std::size_t c = 0; c < D; ++c) r.add(dp.l1mv(t, z, c) + prev[z * D + c]);
      reset_mass[z] = r.value();
    }
    reset_continuation(dp, beta, t, cont);
    for (std::size_t i = 0; i < K; ++i) {
      for (std::size_t j = 0; j < K; ++j) {
        const double lw = reset_mass[i] + dp.la(t, i, j) + dp.b[t * K + j] + beta[(t * K + j) * D] - L;
        g.log_A[(t * K + i) * K + j] = std::exp(lw);
      }
    }
    const std::size_t off = dp.duration_offset(t);
    for (std::size_t z = 0; z < K; ++z) {
      const double bz = dp.b[t * K + z];
      for (std::size_t c = 0; c < D; ++c) {
        const double a = prev[z * D + c];
        if (a == kNegInf) continue;
        g.log_1mv[off + z * D + c] += std::exp(a + dp.l1mv(t, z, c) + cont[z] - L);
        if (c + 1 < D) {
          g.log_v[off + z * D + c] += std::exp(a + dp.lv(t, z, c) + bz + beta[(t * K + z) * D + c + 1] - L);
        }
      }
    }
  }
  return g;
}

DPInputs extract(const DPTensors& x, std::size_t T, std::size_t B, std::size_t D, std::size_t s) {
  const std::size_t K = x.log_pi.numel();
  DPInputs dp;
  dp.T = T;
  dp.K = K;
  dp.D = D;
  dp.log_pi.assign(x.log_pi.values().begin(), x.log_pi.values().end());
  dp.b.resize(T * K);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t k = 0; k < K; ++k) dp.b[t * K + k] = x.b.at(t * B + s, k);
  dp.log_A.assign(T * K * K, 0.0);
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t i = 0; i < K * K; ++i) dp.log_A[t * K * K + i] = x.log_A.at((t - 1) * B + s, i);
  const bool shared = x.log_v.rows() == 1;
  if (shared) {
    dp.log_v.assign(x.log_v.values().begin(), x.log_v.values().end());
    dp.log_1mv.assign(x.log_1mv.values().begin(), x.log_1mv.values().end());
  } else {
    dp.log_v.resize(T * K * D);
    dp.log_1mv.resize(T * K * D);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t i = 0; i < K * D; ++i) {
        dp.log_v[t * K * D + i] = x.log_v.at(t * B + s, i);
        dp.log_1mv[t * K * D + i] = x.log_1mv.at(t * B + s, i);
      }
    if (T == 1) {
      dp.log_v.resize(K * D);
      dp.log_1mv.resize(K * D);
    }
  }
  return dp;
}

nn::Tensor loglik(const DPTensors& x, std::size_t T, std::size_t B, std::size_t D) {
  const std::size_t K = x.log_pi.numel();
  require(T >= 1 && B >= 1, "hsmm::loglik: empty batch");
  require(x.b.rows() == T * B && x.b.cols() == K, "hsmm::loglik: b must be [T*B, K]");
  require(T == 1 || (x.log_A.defined() && x.log_A.rows() == (T - 1) * B && x.log_A.cols() == K * K),
          "hsmm::loglik: log_A must be [(T-1)*B, K*K]");
  require(x.log_v.cols() == K * D && x.log_1mv.cols() == K * D, "hsmm::loglik: duration tables must have K*D columns");
  require(x.log_v.rows() == 1 || x.log_v.rows() == T * B, "hsmm::loglik: duration tables must have 1 or T*B rows");
  require(x.log_v.rows() == x.log_1mv.rows(), "hsmm::loglik: duration table row counts differ");

  auto inputs = std::make_shared<std::vector<DPInputs>>();
  auto posts = std::make_shared<std::vector<DiscretePosterior>>();
  std::vector<double> out(B);
  for (std::size_t s = 0; s < B; ++s) {
    inputs->push_back(extract(x, T, B, D, s));
    posts->push_back(posterior(inputs->back()));
    out[s] = posts->back().loglik;
  }
  std::vector<nn::Tensor> parents = {x.log_pi, x.b, x.log_v, x.log_1mv};
  if (T > 1) parents.push_back(x.log_A);
  const bool shared = x.log_v.rows() == 1;
  return nn::make_op({B}, std::move(out), std::move(parents), [=](nn::Node& self) {
    nn::Node& pi = *self.parents[0];
    nn::Node& pb = *self.parents[1];
    nn::Node& pv = *self.parents[2];
    nn::Node& p1mv = *self.parents[3];
    nn::Node* pA = T > 1 ? self.parents[4].get() : nullptr;
    for (std::size_t s = 0; s < B; ++s) {
      const double gs = self.grad[s];
      if (gs == 0.0) continue;
      const DPInputs& dp = (*inputs)[s];
      const DPGradients g = loglik_gradients(dp, (*posts)[s]);
      if (pi.requires_grad)
        for (std::size_t k = 0; k < K; ++k) pi.grad[k] += gs * g.log_pi[k];
      if (pb.requires_grad)
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t k = 0; k < K; ++k) pb.grad[(t * B + s) * K + k] += gs * g.b[t * K + k];
      if (pA && pA->requires_grad)
        for (std::size_t t = 1; t < T; ++t)
          for (std::size_t i = 0; i < K * K; ++i) pA->grad[((t - 1) * B + s) * K * K + i] += gs * g.log_A[t * K * K + i];
      const std::size_t KD = K * D;
      auto scatter = [&](nn::Node& node, const std::vector<double>& gd) {
        if (!node.requires_grad) return;
        if (shared) {
          for (std::size_t i = 0; i < KD; ++i) node.grad[i] += gs * gd[i];
        } else if (gd.size() == KD) {
          // T == 1: no transitions, nothing to propagate.
        } else {
          for (std::size_t t = 0; t < T; ++t)
            for (std::size_t i = 0; i < KD; ++i) node.grad[(t * B + s) * KD + i] += gs * gd[t * KD + i];
        }
      };
      scatter(pv, g.log_v);
      scatter(p1mv, g.log_1mv);
    }
  });
}

}  // namespace redsds::hsmm

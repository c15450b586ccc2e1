#include "redsds/model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "redsds/error.hpp"

namespace redsds::model {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

nn::Tensor row_tensor(std::span<const double> v) {
  return nn::Tensor::constant({1, v.size()}, std::vector<double>(v.begin(), v.end()));
}

// Repeats a [n] or [1, n] tensor over `rows` rows.
nn::Tensor expand_rows(const nn::Tensor& t, std::size_t rows) {
  const nn::Tensor row = t.rank() == 1 ? nn::reshape(t, {1, t.numel()}) : t;
  if (rows == 1) return row;
  std::vector<std::size_t> idx(rows, 0);
  return nn::gather_rows(row, idx);
}

}  // namespace

void ModelConfig::validate() const {
  require(num_switches >= 1, "model: K must be at least 1");
  require(min_duration >= 1, "model: d_min must be at least 1");
  require(max_duration >= min_duration, "model: d_max must be >= d_min");
  require(state_dim >= 1 && obs_dim >= 1, "model: state and observation dimensions must be positive");
  require(embedder_hidden >= 1 && rnn_hidden >= 1, "model: inference network sizes must be positive");
  if (controls_enabled) {
    require(num_static_ids >= 1 && static_embed_dim >= 1 && control_dim >= 1 && control_hidden >= 1,
            "model: control network sizes must be positive");
  }
}

nn::Tensor increment_log_probs(const nn::Tensor& log_rho_valid, std::size_t min_duration, std::size_t max_duration) {
  const std::size_t D = max_duration;
  const std::size_t span = max_duration - min_duration + 1;
  if (log_rho_valid.cols() != span)
    throw ContractError("increment_log_probs: expected " + std::to_string(span) + " columns");
  const std::size_t rows = log_rho_valid.rows();
  const std::size_t off = min_duration - 1;  // storage index of d_min
  const auto lr = log_rho_valid.values();

  // tails[r * (span + 1) + j] = log sum_{i >= j} rho_i, with tails[span] = -inf
  std::vector<double> tails(rows * (span + 1), kNegInf);
  std::vector<double> out(rows * 2 * D);
  for (std::size_t r = 0; r < rows; ++r) {
    double* L = tails.data() + r * (span + 1);
    const double* row = lr.data() + r * span;
    for (std::size_t j = span; j-- > 0;) {
      const double a = L[j + 1], b = row[j];
      if (a == kNegInf) {
        L[j] = b;
      } else if (b == kNegInf) {
        L[j] = a;
      } else {
        L[j] = std::max(a, b) + std::log1p(std::exp(-std::abs(a - b)));
      }
    }
    double* lv = out.data() + r * 2 * D;
    double* l1mv = lv + D;
    for (std::size_t c = 0; c < off; ++c) {
      lv[c] = 0.0;
      l1mv[c] = kNegInf;
    }
    for (std::size_t j = 0; j < span; ++j) {
      const std::size_t c = off + j;
      if (j + 1 == span) {
        lv[c] = kNegInf;
        l1mv[c] = 0.0;
      } else if (L[j] == kNegInf) {
        // unreachable count: no mass left in the tail
        lv[c] = 0.0;
        l1mv[c] = kNegInf;
      } else {
        lv[c] = L[j + 1] - L[j];
        l1mv[c] = row[j] - L[j];
      }
    }
  }
  return nn::make_op({rows, 2 * D}, std::move(out), {log_rho_valid}, [=](nn::Node& self) {
    nn::Node& p = *self.parents[0];
    std::vector<double> dL(span);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* L = tails.data() + r * (span + 1);
      const double* row = p.value.data() + r * span;
      const double* gv = self.grad.data() + r * 2 * D + off;
      const double* g1 = gv + D;
      double* gp = p.grad.data() + r * span;
      std::fill(dL.begin(), dL.end(), 0.0);
      for (std::size_t j = 0; j + 1 < span; ++j) {
        if (L[j] == kNegInf) continue;
        // log(1 - v_j) = row_j - L_j ; log v_j = L_{j+1} - L_j
        gp[j] += g1[j];
        dL[j] -= g1[j] + gv[j];
        if (L[j + 1] != kNegInf) dL[j + 1] += gv[j];
      }
      for (std::size_t j = 0; j < span; ++j) {
        if (dL[j] == 0.0 || L[j] == kNegInf) continue;
        for (std::size_t i = j; i < span; ++i) gp[i] += dL[j] * std::exp(row[i] - L[j]);
      }
    }
  });
}

SwitchingModel::SwitchingModel(const ModelConfig& config, nn::ParamStore& store, std::mt19937_64& rng)
    : config_(config) {
  config_.validate();
  const std::size_t K = config_.num_switches, m = config_.state_dim, d = config_.obs_dim;
  const std::size_t c = config_.effective_control_dim();

  pi_logits_ = store.add_zeros("gen.pi_logits", {K});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> mu(K * m);
  for (double& v : mu) v = normal(rng);
  init_mean_ = store.add("gen.init.mean", {K, m}, std::move(mu));
  init_raw_var_ = store.add_zeros("gen.init.raw_var", {K, m});

  if (config_.controls_enabled) {
    std::vector<double> table(config_.num_static_ids * config_.static_embed_dim);
    for (double& v : table) v = normal(rng);
    control_table_ = store.add("gen.control.embedding", {config_.num_static_ids, config_.static_embed_dim},
                               std::move(table));
    control_net_ = nn::Mlp(store, "gen.control.net", config_.static_embed_dim + config_.time_feature_dim,
                           {config_.control_hidden}, c, true, rng);
    duration_net_ = nn::Mlp(store, "gen.duration.net", c, {config_.duration_hidden}, K * config_.duration_span(),
                            true, rng);
  } else {
    duration_logits_ = store.add_zeros("gen.duration.logits", {K, config_.duration_span()});
  }

  switch_net_ = nn::Mlp(store, "gen.switch.net", m + c, {config_.effective_switch_hidden()}, K * K, true, rng);

  for (std::size_t k = 0; k < K; ++k) {
    const std::string prefix = "gen.transition." + std::to_string(k);
    if (config_.nonlinear_transition) {
      transition_nets_.emplace_back(store, prefix, m + c, config_.transition_hidden, 2 * m, true, rng);
    } else {
      transition_nets_.emplace_back(store, prefix, m + c, std::vector<std::size_t>{}, m, false, rng);
      transition_raw_var_.push_back(store.add_zeros(prefix + ".raw_var", {m}));
    }
  }
  if (config_.nonlinear_emission) {
    emission_net_ = nn::Mlp(store, "gen.emission", m, config_.emission_hidden, 2 * d, true, rng);
  } else {
    emission_net_ = nn::Mlp(store, "gen.emission", m, {}, d, false, rng);
    emission_raw_var_ = store.add_zeros("gen.emission.raw_var", {d});
  }
}

nn::Tensor SwitchingModel::control_embed(std::span<const std::size_t> static_ids,
                                         const nn::Tensor& time_features) const {
  if (!config_.controls_enabled) return {};
  for (std::size_t id : static_ids) {
    if (id >= config_.num_static_ids)
      throw ContractError("control_embed: static id " + std::to_string(id) + " out of range");
  }
  nn::Tensor emb = nn::gather_rows(control_table_, static_ids);
  nn::Tensor in = emb;
  if (config_.time_feature_dim > 0) {
    if (!time_features.defined() || time_features.cols() != config_.time_feature_dim ||
        time_features.rows() != static_ids.size())
      throw ContractError("control_embed: time features must be [rows, " +
                          std::to_string(config_.time_feature_dim) + "]");
    in = nn::concat_cols({emb, time_features});
  }
  return control_net_(in);
}

nn::Tensor SwitchingModel::batch_controls(std::span<const SeriesControls> controls, std::size_t T) const {
  if (!config_.controls_enabled) return {};
  const std::size_t B = controls.size();
  const std::size_t F = config_.time_feature_dim;
  std::vector<std::size_t> ids(T * B);
  std::vector<double> feats(T * B * F);
  for (std::size_t s = 0; s < B; ++s) {
    require(controls[s].time_features.size() >= T * F, "controls: not enough time features for the window");
    for (std::size_t t = 0; t < T; ++t) {
      ids[t * B + s] = controls[s].static_id;
      std::copy_n(controls[s].time_features.begin() + t * F, F, feats.begin() + (t * B + s) * F);
    }
  }
  nn::Tensor tf = F > 0 ? nn::Tensor::constant({T * B, F}, std::move(feats)) : nn::Tensor{};
  return control_embed(ids, tf);
}

DurationTensors SwitchingModel::duration_tables(const nn::Tensor& u, double tau) const {
  const std::size_t K = config_.num_switches, D = config_.max_duration, span = config_.duration_span();
  nn::Tensor logits;
  if (config_.controls_enabled) {
    require(u.defined(), "duration_tables: controls are enabled but no control input was given");
    logits = duration_net_(u);
  } else {
    logits = duration_logits_;
  }
  const std::size_t R = logits.numel() / (K * span);
  nn::Tensor lr = prob::tempered_log_softmax(nn::reshape(logits, {R * K, span}), tau);
  nn::Tensor inc = increment_log_probs(lr, config_.min_duration, D);
  DurationTensors out;
  out.log_v = nn::reshape(nn::slice_cols(inc, 0, D), {R, K * D});
  out.log_1mv = nn::reshape(nn::slice_cols(inc, D, 2 * D), {R, K * D});
  if (config_.min_duration > 1) {
    nn::Tensor pad = nn::Tensor::full({R * K, config_.min_duration - 1}, kNegInf);
    out.log_rho = nn::reshape(nn::concat_cols({pad, lr}), {R, K * D});
  } else {
    out.log_rho = nn::reshape(lr, {R, K * D});
  }
  return out;
}

DurationTable SwitchingModel::duration_table(std::span<const double> u, double tau) const {
  nn::NoGradGuard guard;
  const auto tensors = duration_tables(config_.controls_enabled ? row_tensor(u) : nn::Tensor{}, tau);
  DurationTable t;
  t.K = config_.num_switches;
  t.D = config_.max_duration;
  for (double lr : tensors.log_rho.values()) t.rho.push_back(std::exp(lr));
  for (double lv : tensors.log_v.values()) t.v.push_back(std::exp(lv));
  return t;
}

nn::Tensor SwitchingModel::transition_input(const nn::Tensor& x_prev, const nn::Tensor& u) const {
  if (!config_.controls_enabled) return x_prev;
  require(u.defined() && u.rows() == x_prev.rows(), "model: control rows must match state rows");
  return nn::concat_cols({x_prev, u});
}

nn::Tensor SwitchingModel::switch_log_transition(const nn::Tensor& x_prev, const nn::Tensor& u, double tau) const {
  const std::size_t K = config_.num_switches;
  require(x_prev.cols() == config_.state_dim, "switch_log_transition: state dimension mismatch");
  nn::Tensor logits = switch_net_(transition_input(x_prev, u));
  const std::size_t R = logits.rows();
  nn::Tensor lp = prob::tempered_log_softmax(nn::reshape(logits, {R * K, K}), tau);
  return nn::reshape(lp, {R, K * K});
}

prob::DiagGaussian SwitchingModel::transition(std::size_t k, const nn::Tensor& x_prev, const nn::Tensor& u) const {
  const std::size_t m = config_.state_dim;
  require(x_prev.cols() == m, "transition: state dimension mismatch");
  nn::Tensor out = transition_nets_.at(k)(transition_input(x_prev, u));
  if (config_.nonlinear_transition) {
    return {nn::slice_cols(out, 0, m), prob::positive_variance(nn::slice_cols(out, m, 2 * m))};
  }
  return {out, expand_rows(prob::positive_variance(transition_raw_var_[k]), out.rows())};
}

prob::DiagGaussian SwitchingModel::emission(const nn::Tensor& x) const {
  const std::size_t d = config_.obs_dim;
  require(x.cols() == config_.state_dim, "emission: state dimension mismatch");
  nn::Tensor out = emission_net_(x);
  if (config_.nonlinear_emission) {
    return {nn::slice_cols(out, 0, d), prob::positive_variance(nn::slice_cols(out, d, 2 * d))};
  }
  return {out, expand_rows(prob::positive_variance(emission_raw_var_), out.rows())};
}

prob::DiagGaussian SwitchingModel::initial_state(std::size_t k, std::size_t rows) const {
  nn::Tensor mean = nn::slice_rows(init_mean_, k, k + 1);
  nn::Tensor var = prob::positive_variance(nn::slice_rows(init_raw_var_, k, k + 1));
  return {expand_rows(mean, rows), expand_rows(var, rows)};
}

nn::Tensor SwitchingModel::log_pi() const { return nn::log_softmax_last(pi_logits_); }

nn::Tensor SwitchingModel::transition_loglik(const nn::Tensor& x, const nn::Tensor& x_prev,
                                             const nn::Tensor& u) const {
  const std::size_t K = config_.num_switches;
  std::vector<nn::Tensor> cols;
  cols.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    nn::Tensor lp = transition(k, x_prev, u).log_prob(x);
    cols.push_back(nn::reshape(lp, {lp.numel(), 1}));
  }
  return K == 1 ? cols[0] : nn::concat_cols(cols);
}

nn::Tensor SwitchingModel::emission_loglik(const nn::Tensor& y, const nn::Tensor& x) const {
  require(y.cols() == config_.obs_dim, "emission_loglik: observation dimension mismatch");
  return emission(x).log_prob(y);
}

nn::Tensor SwitchingModel::initial_state_loglik(const nn::Tensor& x1) const {
  const std::size_t K = config_.num_switches;
  const std::size_t m = config_.state_dim;
  require(x1.cols() == m, "initial_state_loglik: state dimension mismatch");
  // Broadcast each switch's prior over the rows.
  std::vector<nn::Tensor> cols;
  for (std::size_t k = 0; k < K; ++k) {
    nn::Tensor lp = initial_state(k, x1.rows()).log_prob(x1);
    cols.push_back(nn::reshape(lp, {lp.numel(), 1}));
  }
  return K == 1 ? cols[0] : nn::concat_cols(cols);
}

std::vector<double> SwitchingModel::joint_conditional_loglik(std::span<const double> y, std::span<const double> x,
                                                             std::span<const double> x_prev,
                                                             std::span<const double> u) const {
  require(y.size() == config_.obs_dim && x.size() == config_.state_dim && x_prev.size() == config_.state_dim,
          "joint_conditional_loglik: dimension mismatch");
  nn::NoGradGuard guard;
  nn::Tensor ut = config_.controls_enabled ? row_tensor(u) : nn::Tensor{};
  nn::Tensor b = transition_loglik(row_tensor(x), row_tensor(x_prev), ut);
  const double em = emission_loglik(row_tensor(y), row_tensor(x)).item();
  std::vector<double> out(b.values().begin(), b.values().end());
  for (double& v : out) v += em;
  return out;
}

std::pair<std::vector<double>, std::vector<double>> SwitchingModel::initial_loglik(std::span<const double> y,
                                                                                   std::span<const double> x) const {
  require(y.size() == config_.obs_dim && x.size() == config_.state_dim, "initial_loglik: dimension mismatch");
  nn::NoGradGuard guard;
  const nn::Tensor lpi = log_pi();
  nn::Tensor b = initial_state_loglik(row_tensor(x));
  const double em = emission_loglik(row_tensor(y), row_tensor(x)).item();
  std::vector<double> b1(b.values().begin(), b.values().end());
  for (double& v : b1) v += em;
  return {std::vector<double>(lpi.values().begin(), lpi.values().end()), b1};
}

hsmm::DPTensors SwitchingModel::dp_tensors(const nn::Tensor& Y, const nn::Tensor& X, const nn::Tensor& U,
                                           std::size_t T, std::size_t B, const Temperatures& temps) const {
  require(Y.rows() == T * B && X.rows() == T * B, "dp_tensors: expected T*B rows");
  hsmm::DPTensors out;
  out.log_pi = log_pi();
  nn::Tensor em = emission_loglik(Y, X);
  em = nn::reshape(em, {T * B, 1});
  nn::Tensor init = initial_state_loglik(nn::slice_rows(X, 0, B));
  if (T > 1) {
    nn::Tensor x_prev = nn::slice_rows(X, 0, (T - 1) * B);
    nn::Tensor x_cur = nn::slice_rows(X, B, T * B);
    nn::Tensor u_cur = config_.controls_enabled ? nn::slice_rows(U, B, T * B) : nn::Tensor{};
    nn::Tensor trans = transition_loglik(x_cur, x_prev, u_cur);
    out.b = nn::concat_rows({init, trans}) + em;
    out.log_A = switch_log_transition(x_prev, u_cur, temps.switch_tau);
  } else {
    out.b = init + em;
  }
  DurationTensors dur = duration_tables(U, temps.duration_tau);
  out.log_v = dur.log_v;
  out.log_1mv = dur.log_1mv;
  return out;
}

Trajectory SwitchingModel::sample_trajectory(std::size_t T, const SeriesControls* controls, std::uint64_t seed,
                                             const Temperatures& temps) const {
  require(T >= 1, "sample_trajectory: T must be at least 1");
  require(!config_.controls_enabled || controls != nullptr, "sample_trajectory: controls required");
  nn::NoGradGuard guard;
  const std::size_t K = config_.num_switches, D = config_.max_duration;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  nn::Tensor U;
  if (config_.controls_enabled) {
    const SeriesControls one[] = {*controls};
    U = batch_controls(one, T);
  }
  auto u_row = [&](std::size_t t) { return U.defined() ? nn::slice_rows(U, t, t + 1) : nn::Tensor{}; };
  DurationTensors shared_dur;
  if (!config_.controls_enabled) shared_dur = duration_tables({}, temps.duration_tau);

  auto draw = [&](const prob::DiagGaussian& g) {
    std::vector<double> e(g.mean.numel());
    for (double& v : e) v = normal(rng);
    return g.rsample(nn::Tensor::constant(g.mean.shape(), std::move(e)));
  };

  Trajectory tr;
  tr.T = T;
  const auto lpi = log_pi();
  std::vector<double> pi(K);
  for (std::size_t k = 0; k < K; ++k) pi[k] = std::exp(lpi[k]);
  std::size_t z = prob::sample_index(pi, unif(rng));
  std::size_t c = 1;
  nn::Tensor x = draw(initial_state(z, 1));
  nn::Tensor y = draw(emission(x));
  auto record = [&] {
    tr.z.push_back(z);
    tr.c.push_back(c);
    tr.x.insert(tr.x.end(), x.values().begin(), x.values().end());
    tr.y.insert(tr.y.end(), y.values().begin(), y.values().end());
  };
  record();
  for (std::size_t t = 1; t < T; ++t) {
    const nn::Tensor ut = u_row(t);
    const DurationTensors dur = config_.controls_enabled ? duration_tables(ut, temps.duration_tau) : shared_dur;
    const double v = std::exp(dur.log_v[z * D + (c - 1)]);
    if (unif(rng) < v) {
      ++c;
    } else {
      c = 1;
      const nn::Tensor la = switch_log_transition(x, ut, temps.switch_tau);
      std::vector<double> row(K);
      for (std::size_t j = 0; j < K; ++j) row[j] = std::exp(la[z * K + j]);
      z = prob::sample_index(row, unif(rng));
    }
    x = draw(transition(z, x, ut));
    y = draw(emission(x));
    record();
  }
  return tr;
}

}  // namespace redsds::model

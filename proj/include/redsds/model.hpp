#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "redsds/hsmm.hpp"
#include "redsds/layers.hpp"
#include "redsds/prob.hpp"

namespace redsds::model {

struct ModelConfig {
  std::size_t num_switches = 2;  // K
  std::size_t min_duration = 1;  // d_min
  std::size_t max_duration = 20; // d_max
  std::size_t state_dim = 4;     // m
  std::size_t obs_dim = 1;       // d

  bool nonlinear_transition = true;  // MLP heads, otherwise linear without bias
  bool nonlinear_emission = true;
  std::vector<std::size_t> transition_hidden = {32};
  std::vector<std::size_t> emission_hidden = {8, 32};
  std::size_t switch_hidden = 0;  // 0 selects 4 * K^2

  // Controls: u_t = f_u(embedding(static id), time features).
  bool controls_enabled = false;
  std::size_t num_static_ids = 1;
  std::size_t static_embed_dim = 5;
  std::size_t time_feature_dim = 0;
  std::size_t control_dim = 16;
  std::size_t control_hidden = 32;
  std::size_t duration_hidden = 64;

  // Inference network.
  std::size_t embedder_hidden = 4;
  std::size_t rnn_hidden = 16;
  std::vector<std::size_t> posterior_hidden = {32};

  std::size_t duration_span() const { return max_duration - min_duration + 1; }
  std::size_t effective_control_dim() const { return controls_enabled ? control_dim : 0; }
  std::size_t effective_switch_hidden() const {
    return switch_hidden ? switch_hidden : 4 * num_switches * num_switches;
  }
  void validate() const;
};

struct Temperatures {
  double switch_tau = 1.0;
  double duration_tau = 1.0;
};

// Per-series control inputs: a static id and T x F time features (row-major).
struct SeriesControls {
  std::size_t static_id = 0;
  std::vector<double> time_features;
};

// Duration model in log space; each row holds K blocks of d_max counts.
struct DurationTensors {
  nn::Tensor log_rho;  // [R, K * d_max], -inf below d_min
  nn::Tensor log_v;    // [R, K * d_max], log increment probability
  nn::Tensor log_1mv;  // [R, K * d_max], log reset probability
};

// Plain-value duration table for one row.
struct DurationTable {
  std::size_t K = 0, D = 0;
  std::vector<double> rho;  // [K, D]
  std::vector<double> v;    // [K, D]
  double rho_at(std::size_t k, std::size_t d) const { return rho[k * D + d - 1]; }
  double v_at(std::size_t k, std::size_t c) const { return v[k * D + c - 1]; }
};

// Increment/reset log-probabilities from log duration probabilities over the
// valid durations. log_rho_valid: [rows, d_max - d_min + 1] (one switch per
// row). Returns [rows, 2 * d_max]: log v in the first d_max columns, log(1 - v)
// in the rest. Uses v(c) = tail(c + 1) / tail(c) with tail(c) = sum_{d >= c} rho(d).
nn::Tensor increment_log_probs(const nn::Tensor& log_rho_valid, std::size_t min_duration, std::size_t max_duration);

struct Trajectory {
  std::size_t T = 0;
  std::vector<double> y;       // [T, d]
  std::vector<double> x;       // [T, m]
  std::vector<std::size_t> z;  // [T]
  std::vector<std::size_t> c;  // [T], 1-based counts
};

class SwitchingModel {
 public:
  SwitchingModel(const ModelConfig& config, nn::ParamStore& store, std::mt19937_64& rng);

  const ModelConfig& config() const { return config_; }

  // [R, F] time features plus one static id per row -> [R, control_dim].
  nn::Tensor control_embed(std::span<const std::size_t> static_ids, const nn::Tensor& time_features) const;
  // Controls for a batch of series of length T, time-major rows: [T * B, c].
  // Returns an undefined tensor when controls are disabled.
  nn::Tensor batch_controls(std::span<const SeriesControls> controls, std::size_t T) const;

  // u: [R, c] when controls are enabled, ignored otherwise (single shared row).
  DurationTensors duration_tables(const nn::Tensor& u, double tau) const;
  DurationTable duration_table(std::span<const double> u, double tau) const;

  // [R, K * K], row-block i holds log p(z_t = . | z_{t-1} = i, c_t = 1).
  nn::Tensor switch_log_transition(const nn::Tensor& x_prev, const nn::Tensor& u, double tau) const;

  prob::DiagGaussian transition(std::size_t k, const nn::Tensor& x_prev, const nn::Tensor& u) const;
  prob::DiagGaussian emission(const nn::Tensor& x) const;
  prob::DiagGaussian initial_state(std::size_t k, std::size_t rows) const;
  nn::Tensor log_pi() const;  // [K]

  nn::Tensor transition_loglik(const nn::Tensor& x, const nn::Tensor& x_prev, const nn::Tensor& u) const;  // [R, K]
  nn::Tensor emission_loglik(const nn::Tensor& y, const nn::Tensor& x) const;                             // [R]
  nn::Tensor initial_state_loglik(const nn::Tensor& x1) const;                                             // [R, K]

  // b_t[k] = log p(y_t | x_t) + log p(x_t | x_prev, z_t = k, u_t)
  std::vector<double> joint_conditional_loglik(std::span<const double> y, std::span<const double> x,
                                               std::span<const double> x_prev, std::span<const double> u) const;
  // (log pi, b_1) with b_1[k] = log p(y_1 | x_1) + log N(x_1; mu_k, Sigma_k)
  std::pair<std::vector<double>, std::vector<double>> initial_loglik(std::span<const double> y,
                                                                     std::span<const double> x) const;

  // Inputs of exact discrete inference for a batch. Y: [T*B, d], X: [T*B, m],
  // U: [T*B, c] or undefined. Rows are time-major.
  hsmm::DPTensors dp_tensors(const nn::Tensor& Y, const nn::Tensor& X, const nn::Tensor& U, std::size_t T,
                             std::size_t B, const Temperatures& temps) const;

  // Ancestral sample of length T.
  Trajectory sample_trajectory(std::size_t T, const SeriesControls* controls, std::uint64_t seed,
                               const Temperatures& temps) const;

 private:
  nn::Tensor transition_input(const nn::Tensor& x_prev, const nn::Tensor& u) const;

  ModelConfig config_;
  nn::Tensor pi_logits_;
  nn::Tensor init_mean_;
  nn::Tensor init_raw_var_;
  nn::Tensor duration_logits_;  // [K, span] when controls are disabled
  nn::Mlp duration_net_;        // controls enabled
  nn::Mlp switch_net_;
  std::vector<nn::Mlp> transition_nets_;
  std::vector<nn::Tensor> transition_raw_var_;  // linear heads only
  nn::Mlp emission_net_;
  nn::Tensor emission_raw_var_;  // linear head only
  nn::Tensor control_table_;
  nn::Mlp control_net_;
};

}  // namespace redsds::model

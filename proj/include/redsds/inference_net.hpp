#pragma once

// Amortized posterior over continuous states:
//   h1 = biGRU(y),  r_t = tanh(W [x_{t-1}, h1_t, u_t] + U r_{t-1} + b),
//   x_t ~ N(g_mu(r_t), g_var(r_t)),  x_0 = r_0 = 0.
// Batches are time-major: row t * B + s.

#include <random>

#include "redsds/layers.hpp"
#include "redsds/model.hpp"

namespace redsds::inference {

struct PosteriorSample {
  std::size_t T = 0, B = 0;
  nn::Tensor x;         // [T * B, m]
  nn::Tensor mean;      // [T * B, m]
  nn::Tensor variance;  // [T * B, m]
  nn::Tensor log_q;     // [B], sum over t of log q(x_t | x_{<t}, h1)
};

class InferenceNetwork {
 public:
  InferenceNetwork(const model::ModelConfig& config, nn::ParamStore& store, std::mt19937_64& rng);

  // Y: [T * B, d] -> [T * B, 2 * embedder_hidden]; forward half first.
  nn::Tensor embed(const nn::Tensor& Y, std::size_t T, std::size_t B) const;
  // noise: [T * B, m] standard normal draws. U: [T * B, c] or undefined.
  PosteriorSample rollout(const nn::Tensor& H1, const nn::Tensor& U, const nn::Tensor& noise, std::size_t T,
                          std::size_t B) const;
  PosteriorSample sample(const nn::Tensor& Y, const nn::Tensor& U, const nn::Tensor& noise, std::size_t T,
                         std::size_t B) const {
    return rollout(embed(Y, T, B), U, noise, T, B);
  }

 private:
  model::ModelConfig config_;
  nn::GruCell forward_cell_;
  nn::GruCell backward_cell_;
  nn::Linear rnn_input_;      // [x_{t-1}, h1_t, u_t] -> r, with bias
  nn::Linear rnn_recurrent_;  // r_{t-1} -> r
  nn::Mlp head_;              // r -> [mean, raw variance]
};

}  // namespace redsds::inference

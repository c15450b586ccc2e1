#include "redsds/inference_net.hpp"

#include "redsds/error.hpp"
#include "redsds/prob.hpp"

namespace redsds::inference {

InferenceNetwork::InferenceNetwork(const model::ModelConfig& config, nn::ParamStore& store, std::mt19937_64& rng)
    : config_(config) {
  config_.validate();
  const std::size_t d = config_.obs_dim, m = config_.state_dim, H = config_.embedder_hidden;
  const std::size_t R = config_.rnn_hidden, c = config_.effective_control_dim();
  forward_cell_ = nn::GruCell(store, "inf.embed.forward", d, H, rng);
  backward_cell_ = nn::GruCell(store, "inf.embed.backward", d, H, rng);
  rnn_input_ = nn::Linear(store, "inf.rnn.input", m + 2 * H + c, R, true, rng);
  rnn_recurrent_ = nn::Linear(store, "inf.rnn.recurrent", R, R, false, rng);
  head_ = nn::Mlp(store, "inf.head", R, config_.posterior_hidden, 2 * m, true, rng);
}

nn::Tensor InferenceNetwork::embed(const nn::Tensor& Y, std::size_t T, std::size_t B) const {
  require(T >= 1 && Y.rows() == T * B && Y.cols() == config_.obs_dim, "embed: expected [T*B, d] observations");
  const std::size_t H = config_.embedder_hidden;
  const nn::Tensor pf = forward_cell_.project_inputs(Y);
  const nn::Tensor pb = backward_cell_.project_inputs(Y);
  std::vector<nn::Tensor> fwd(T), bwd(T);
  nn::Tensor h = nn::Tensor::zeros({B, H});
  for (std::size_t t = 0; t < T; ++t) {
    h = forward_cell_.step(nn::slice_rows(pf, t * B, (t + 1) * B), h);
    fwd[t] = h;
  }
  h = nn::Tensor::zeros({B, H});
  for (std::size_t t = T; t-- > 0;) {
    h = backward_cell_.step(nn::slice_rows(pb, t * B, (t + 1) * B), h);
    bwd[t] = h;
  }
  return nn::concat_cols({nn::concat_rows(fwd), nn::concat_rows(bwd)});
}

PosteriorSample InferenceNetwork::rollout(const nn::Tensor& H1, const nn::Tensor& U, const nn::Tensor& noise,
                                          std::size_t T, std::size_t B) const {
  const std::size_t m = config_.state_dim, R = config_.rnn_hidden;
  require(H1.rows() == T * B && noise.rows() == T * B && noise.cols() == m, "rollout: expected T*B rows");
  // The input projection of [x_{t-1}, h1_t, u_t] splits into a state part and
  // a part computed for all steps at once.
  const nn::Tensor& W = rnn_input_.weight();
  const nn::Tensor Wx = nn::slice_rows(W, 0, m);
  const nn::Tensor Wrest = nn::slice_rows(W, m, W.dim(0));
  nn::Tensor rest = config_.controls_enabled ? nn::concat_cols({H1, U}) : H1;
  const nn::Tensor pre = nn::affine(rest, Wrest, rnn_input_.bias());

  std::vector<nn::Tensor> xs(T), means(T), vars(T);
  nn::Tensor r = nn::Tensor::zeros({B, R});
  nn::Tensor x = nn::Tensor::zeros({B, m});
  for (std::size_t t = 0; t < T; ++t) {
    nn::Tensor a = nn::slice_rows(pre, t * B, (t + 1) * B) + rnn_recurrent_(r);
    if (t > 0) a = a + nn::matmul(x, Wx);
    r = nn::tanh(a);
    const nn::Tensor out = head_(r);
    prob::DiagGaussian g{nn::slice_cols(out, 0, m), prob::positive_variance(nn::slice_cols(out, m, 2 * m))};
    x = g.rsample(nn::slice_rows(noise, t * B, (t + 1) * B));
    xs[t] = x;
    means[t] = g.mean;
    vars[t] = g.variance;
  }
  PosteriorSample s;
  s.T = T;
  s.B = B;
  s.x = nn::concat_rows(xs);
  s.mean = nn::concat_rows(means);
  s.variance = nn::concat_rows(vars);
  const nn::Tensor lp = prob::DiagGaussian{s.mean, s.variance}.log_prob(s.x);
  s.log_q = nn::sum(nn::reshape(lp, {T, B}), 0);
  return s;
}

}  // namespace redsds::inference

#include "redsds/layers.hpp"

#include "redsds/error.hpp"

namespace redsds::nn {

Linear::Linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out, bool bias,
               std::mt19937_64& rng)
    : in_(in), out_(out) {
  if (in == 0 || out == 0) throw ContractError("Linear layer " + prefix + " needs positive sizes");
  weight_ = store.add_glorot(prefix + ".weight", in, out, rng);
  if (bias) bias_ = store.add_zeros(prefix + ".bias", {out});
}

Tensor Linear::operator()(const Tensor& x) const {
  return bias_.defined() ? affine(x, weight_, bias_) : matmul(x, weight_);
}

Mlp::Mlp(ParamStore& store, const std::string& prefix, std::size_t in, const std::vector<std::size_t>& hidden,
         std::size_t out, bool output_bias, std::mt19937_64& rng) {
  std::size_t width = in;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    layers_.emplace_back(store, prefix + ".l" + std::to_string(i), width, hidden[i], true, rng);
    width = hidden[i];
  }
  layers_.emplace_back(store, prefix + ".l" + std::to_string(hidden.size()), width, out, output_bias, rng);
}

Tensor Mlp::operator()(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) h = relu(layers_[i](h));
  return layers_.back()(h);
}

GruCell::GruCell(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t hidden,
                 std::mt19937_64& rng)
    : hidden_(hidden),
      input_(store, prefix + ".input", in, 3 * hidden, true, rng),
      recurrent_(store, prefix + ".recurrent", hidden, 3 * hidden, true, rng) {}

Tensor GruCell::project_inputs(const Tensor& x) const { return input_(x); }

Tensor GruCell::step(const Tensor& projected, const Tensor& h) const {
  const std::size_t H = hidden_;
  Tensor gh = recurrent_(h);
  Tensor rz = sigmoid(slice_cols(projected, 0, 2 * H) + slice_cols(gh, 0, 2 * H));
  Tensor r = slice_cols(rz, 0, H);
  Tensor z = slice_cols(rz, H, 2 * H);
  Tensor n = tanh(slice_cols(projected, 2 * H, 3 * H) + r * slice_cols(gh, 2 * H, 3 * H));
  return n + z * (h - n);
}

}  // namespace redsds::nn

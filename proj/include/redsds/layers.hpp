#pragma once

#include <random>
#include <string>
#include <vector>

#include "redsds/param_store.hpp"

namespace redsds::nn {

class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out, bool bias,
         std::mt19937_64& rng);

  // x: [rows, in] -> [rows, out]
  Tensor operator()(const Tensor& x) const;

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  std::size_t in_ = 0, out_ = 0;
  Tensor weight_;
  Tensor bias_;
};

// Fully connected ReLU network: in -> hidden[0] -> ... -> out (linear output).
// With no hidden layers it is a single linear map.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamStore& store, const std::string& prefix, std::size_t in, const std::vector<std::size_t>& hidden,
      std::size_t out, bool output_bias, std::mt19937_64& rng);

  Tensor operator()(const Tensor& x) const;

  std::size_t in_features() const { return layers_.front().in_features(); }
  std::size_t out_features() const { return layers_.back().out_features(); }
  const std::vector<Linear>& layers() const { return layers_; }

 private:
  std::vector<Linear> layers_;
};

// Gated recurrent unit with separate input and recurrent biases:
//   r = sigmoid(Wr x + br + Ur h + cr)
//   z = sigmoid(Wz x + bz + Uz h + cz)
//   n = tanh(Wn x + bn + r * (Un h + cn))
//   h' = (1 - z) * n + z * h
class GruCell {
 public:
  GruCell() = default;
  GruCell(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t hidden, std::mt19937_64& rng);

  // Input projections for many rows at once: [rows, in] -> [rows, 3 * hidden].
  Tensor project_inputs(const Tensor& x) const;
  // One step given a projected input row block and the previous state.
  Tensor step(const Tensor& projected, const Tensor& h) const;

  std::size_t hidden_size() const { return hidden_; }

 private:
  std::size_t hidden_ = 0;
  Linear input_;
  Linear recurrent_;
};

}  // namespace redsds::nn

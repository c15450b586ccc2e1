#pragma once

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "redsds/tensor.hpp"

namespace redsds::nn {

using GradMap = std::map<std::string, std::vector<double>>;

// Named learnable tensors. Iteration order is sorted by name.
class ParamStore {
 public:
  // Registers a new parameter. Names must be unique.
  Tensor add(const std::string& name, Shape shape, std::vector<double> values);
  // Glorot-uniform initialized weight of shape [fan_in, fan_out].
  Tensor add_glorot(const std::string& name, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);
  Tensor add_zeros(const std::string& name, Shape shape);

  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  std::size_t size() const { return params_.size(); }
  std::size_t total_elements() const;

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  // Overwrite values of an existing parameter (shape must match).
  void assign(const std::string& name, std::span<const double> values);
  // Copy every value from `other`; names and shapes must coincide.
  void assign_all(const ParamStore& other);

  void save(const std::filesystem::path& path) const;
  // Reads a checkpoint into a fresh store.
  static ParamStore load(const std::filesystem::path& path);

 private:
  std::map<std::string, Tensor> params_;
};

// Runs backward on `loss` and collects the gradient of every parameter in
// `params`; unreachable parameters get zeros.
GradMap backward(const Tensor& loss, const ParamStore& params);

double global_norm(const GradMap& grads);

// Worst discrepancy between backward() and central finite differences over
// every parameter coordinate. Discrepancy per coordinate is
// |analytic - numeric| / max(|analytic|, |numeric|, floor). `f` must be
// deterministic. Returns 0 when both gradients vanish everywhere.
struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};
GradCheckResult finite_difference_check(const std::function<Tensor()>& f, ParamStore& params,
                                        double step = 1e-5, double floor = 1e-3);

}  // namespace redsds::nn

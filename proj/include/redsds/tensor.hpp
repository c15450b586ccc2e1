#pragma once

// Dense double-precision tensors with tape-free reverse-mode differentiation.
//
// Every operation on tensors that require gradients records its parents and a
// backward closure on the result node. backward() walks the resulting DAG in
// reverse topological order. Graphs are freed when the last handle to the
// result goes away.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace redsds::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node;
using NodePtr = std::shared_ptr<Node>;
using BackwardFn = std::function<void(Node& self)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated only while backward() runs
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  BackwardFn backward;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor parameter(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  explicit operator bool() const { return defined(); }

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->value.size(); }
  // Size of the last axis; rows() is numel() / cols().
  std::size_t cols() const;
  std::size_t rows() const;

  std::span<const double> values() const { return node_->value; }
  double operator[](std::size_t i) const { return node_->value[i]; }
  double at(std::size_t row, std::size_t col) const;
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  std::span<const double> grad() const { return node_->grad; }

  // In-place access for optimizers and initializers. Must not be used on a
  // tensor that participates in a live graph whose backward() is pending.
  std::span<double> mutable_values() { return node_->value; }

  // Copy of this tensor's values without graph history.
  Tensor detach() const;

  Node* node() const { return node_.get(); }
  const NodePtr& node_ptr() const { return node_; }

 private:
  NodePtr node_;
};

// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Builds a result node. When no parent requires gradients (or recording is
// disabled) the parents and closure are dropped.
Tensor make_op(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
               BackwardFn backward);

// Accumulates reverse-mode gradients into every reachable node that requires
// them. The loss must be a scalar.
void backward(const Tensor& loss);

// ---------------------------------------------------------------------------
// Operations. Binary elementwise ops accept identical shapes, a single-element
// operand, a row operand (shape [n] or [1, n] against [..., n]), or a column
// operand (shape [r, 1] against [r, n]).

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator+(const Tensor& a, double s);
Tensor operator-(const Tensor& a, double s);
Tensor operator*(const Tensor& a, double s);
Tensor operator*(double s, const Tensor& a);
Tensor operator-(const Tensor& a);

// [n, k] x [k, m] -> [n, m]
Tensor matmul(const Tensor& a, const Tensor& b);
// x w + b with b of shape [m] or [1, m], in one node.
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor square(const Tensor& a);

// Reductions.
Tensor sum(const Tensor& a);   // -> [1]
Tensor mean(const Tensor& a);  // -> [1]
// Reduce a rank-2 tensor over `axis`; the reduced axis is dropped.
Tensor sum(const Tensor& a, int axis);
// Reductions over the last axis; the last axis is dropped ([r, n] -> [r]).
Tensor logsumexp_last(const Tensor& a);
// Normalizes along the last axis in log space.
Tensor log_softmax_last(const Tensor& a);

// Shape manipulation on rank-2 tensors (rank-1 tensors count as one row).
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::initializer_list<Tensor> parts);
Tensor concat_cols(std::initializer_list<Tensor> parts);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
// out[i, :] = table[indices[i], :]
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices);

}  // namespace redsds::nn

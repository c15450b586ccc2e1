#include "redsds/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "redsds/error.hpp"

namespace redsds::nn {

namespace {

thread_local bool g_grad_enabled = true;

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

NodePtr new_node(Shape shape, std::vector<double> values, bool requires_grad) {
  require(!shape.empty(), "tensor shape must have at least one axis");
  for (std::size_t d : shape)
    if (d == 0) throw ContractError("tensor dimensions must be positive: " + shape_str(shape));
  if (values.size() != shape_numel(shape))
    throw ContractError("element count " + std::to_string(values.size()) + " does not match shape " + shape_str(shape));
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}

}  // namespace

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  return Tensor(new_node(std::move(shape), std::move(values), false));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  return Tensor(new_node(std::move(shape), std::move(values), true));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = shape_numel(shape);
  return constant(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return constant({1}, {value}); }

std::size_t Tensor::cols() const { return node_->shape.back(); }

std::size_t Tensor::rows() const { return numel() / cols(); }

double Tensor::at(std::size_t row, std::size_t col) const {
  return node_->value.at(row * cols() + col);
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() requires a single-element tensor, got " + shape_str(shape()));
  return node_->value[0];
}

Tensor Tensor::detach() const { return constant(shape(), node_->value); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Tensor make_op(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
               BackwardFn backward_fn) {
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  auto node = new_node(std::move(shape), std::move(values), needs);
  if (needs) {
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node_ptr());
    node->backward = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw ContractError("backward() requires a scalar loss, got " + (loss.defined() ? shape_str(loss.shape()) : "undefined"));
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS; graphs for long sequences are deep.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node(), 0);
  visited.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) n->grad.assign(n->value.size(), 0.0);
  loss.node()->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
  // Intermediate gradients are released; leaves keep theirs for the caller.
  for (Node* n : order) {
    if (!n->parents.empty()) std::vector<double>().swap(n->grad);
  }
}

// ---------------------------------------------------------------------------
// Broadcasting helpers.

namespace {

enum class Bcast { Same, Scalar, Row, Col };

// How `small` maps onto `big` (big determines the output shape).
bool broadcast_mode(const Tensor& big, const Tensor& small, Bcast& mode) {
  if (big.shape() == small.shape()) {
    mode = Bcast::Same;
    return true;
  }
  if (small.numel() == 1) {
    mode = Bcast::Scalar;
    return true;
  }
  const std::size_t n = big.cols();
  const bool small_is_row = (small.rank() == 1 && small.dim(0) == n) ||
                            (small.rank() == 2 && small.dim(0) == 1 && small.dim(1) == n);
  if (small_is_row && big.numel() > n) {
    mode = Bcast::Row;
    return true;
  }
  if (big.rank() == 2 && small.rank() == 2 && small.dim(1) == 1 && small.dim(0) == big.dim(0)) {
    mode = Bcast::Col;
    return true;
  }
  return false;
}

template <Bcast M>
inline std::size_t bidx(std::size_t i, std::size_t cols) {
  if constexpr (M == Bcast::Same) return i;
  if constexpr (M == Bcast::Scalar) return 0;
  if constexpr (M == Bcast::Row) return i % cols;
  if constexpr (M == Bcast::Col) return i / cols;
  return i;
}

// Calls fn.template operator()<MA, MB>() for the runtime modes.
template <class Fn>
void dispatch(Bcast ma, Bcast mb, Fn&& fn) {
  auto inner = [&]<Bcast MA>() {
    switch (mb) {
      case Bcast::Same: fn.template operator()<MA, Bcast::Same>(); break;
      case Bcast::Scalar: fn.template operator()<MA, Bcast::Scalar>(); break;
      case Bcast::Row: fn.template operator()<MA, Bcast::Row>(); break;
      case Bcast::Col: fn.template operator()<MA, Bcast::Col>(); break;
    }
  };
  switch (ma) {
    case Bcast::Same: inner.template operator()<Bcast::Same>(); break;
    case Bcast::Scalar: inner.template operator()<Bcast::Scalar>(); break;
    case Bcast::Row: inner.template operator()<Bcast::Row>(); break;
    case Bcast::Col: inner.template operator()<Bcast::Col>(); break;
  }
}

struct Broadcast {
  Shape shape;
  Bcast mode_a = Bcast::Same;
  Bcast mode_b = Bcast::Same;
  std::size_t cols = 1;
  std::size_t n = 0;
};

Broadcast resolve(const Tensor& a, const Tensor& b, const char* op) {
  Broadcast r;
  Bcast m;
  if (a.numel() >= b.numel() && broadcast_mode(a, b, m)) {
    r.shape = a.shape();
    r.mode_b = m;
  } else if (broadcast_mode(b, a, m)) {
    r.shape = b.shape();
    r.mode_a = m;
  } else {
    throw ContractError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                        shape_str(b.shape()));
  }
  r.cols = r.shape.back();
  r.n = shape_numel(r.shape);
  return r;
}

// f(x, y) -> value; da(x, y) and db(x, y) are partial derivatives.
template <class F, class DA, class DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, F f, DA da, DB db) {
  const Broadcast bc = resolve(a, b, name);
  std::vector<double> out(bc.n);
  const double* av = a.values().data();
  const double* bv = b.values().data();
  dispatch(bc.mode_a, bc.mode_b, [&]<Bcast MA, Bcast MB>() {
    for (std::size_t i = 0; i < bc.n; ++i) out[i] = f(av[bidx<MA>(i, bc.cols)], bv[bidx<MB>(i, bc.cols)]);
  });
  return make_op(bc.shape, std::move(out), {a, b}, [bc, da, db](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const bool ga = pa.requires_grad, gb = pb.requires_grad;
    dispatch(bc.mode_a, bc.mode_b, [&]<Bcast MA, Bcast MB>() {
      for (std::size_t i = 0; i < bc.n; ++i) {
        const std::size_t ia = bidx<MA>(i, bc.cols);
        const std::size_t ib = bidx<MB>(i, bc.cols);
        const double g = self.grad[i];
        if (ga) pa.grad[ia] += g * da(pa.value[ia], pb.value[ib]);
        if (gb) pb.grad[ib] += g * db(pa.value[ia], pb.value[ib]);
      }
    });
  });
}

// f(x) -> y; df(x, y) -> dy/dx.
template <class F, class DF>
Tensor unary(const Tensor& a, F f, DF df) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  return make_op(a.shape(), std::move(out), {a}, [df](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      p.grad[i] += self.grad[i] * df(p.value[i], self.value[i]);
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(
      a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary(
      a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
Tensor operator-(const Tensor& a, double s) { return add_scalar(a, -s); }
Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }
Tensor operator-(const Tensor& a) { return neg(a); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (!(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0)))
    throw ContractError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  std::vector<double> out(n * m, 0.0);
  const double* A = a.values().data();
  const double* B = b.values().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = B + p * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += aip * brow[j];
    }
  }
  return make_op({n, m}, std::move(out), {a, b}, [n, k, m](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const double* G = self.grad.data();
    if (pa.requires_grad) {
      // dA = G B^T, with B^T laid out so the inner loop is contiguous
      std::vector<double> bt(m * k);
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < m; ++j) bt[j * k + p] = pb.value[p * m + j];
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = G + i * m;
        double* arow = pa.grad.data() + i * k;
        for (std::size_t j = 0; j < m; ++j) {
          const double g = grow[j];
          if (g == 0.0) continue;
          const double* btrow = bt.data() + j * k;
          for (std::size_t p = 0; p < k; ++p) arow[p] += g * btrow[p];
        }
      }
    }
    if (pb.requires_grad) {
      // dB = A^T G
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = G + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = pa.value[i * k + p];
          if (aip == 0.0) continue;
          double* brow = pb.grad.data() + p * m;
          for (std::size_t j = 0; j < m; ++j) brow[j] += aip * grow[j];
        }
      }
    }
  });
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (!(x.rank() == 2 && w.rank() == 2 && x.dim(1) == w.dim(0) && b.numel() == w.dim(1)))
    throw ContractError("affine: incompatible shapes " + shape_str(x.shape()) + " x " + shape_str(w.shape()) + " + " +
                        shape_str(b.shape()));
  const std::size_t n = x.dim(0), k = x.dim(1), m = w.dim(1);
  std::vector<double> out(n * m);
  const double* X = x.values().data();
  const double* W = w.values().data();
  const double* bv = b.values().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * m;
    std::copy_n(bv, m, row);
    for (std::size_t p = 0; p < k; ++p) {
      const double xip = X[i * k + p];
      if (xip == 0.0) continue;
      const double* wrow = W + p * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += xip * wrow[j];
    }
  }
  return make_op({n, m}, std::move(out), {x, w, b}, [n, k, m](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    Node& pb = *self.parents[2];
    const double* G = self.grad.data();
    if (px.requires_grad) {
      std::vector<double> wt(m * k);
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < m; ++j) wt[j * k + p] = pw.value[p * m + j];
      for (std::size_t i = 0; i < n; ++i) {
        double* xrow = px.grad.data() + i * k;
        for (std::size_t j = 0; j < m; ++j) {
          const double g = G[i * m + j];
          if (g == 0.0) continue;
          const double* wtrow = wt.data() + j * k;
          for (std::size_t p = 0; p < k; ++p) xrow[p] += g * wtrow[p];
        }
      }
    }
    if (pw.requires_grad) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = G + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const double xip = px.value[i * k + p];
          if (xip == 0.0) continue;
          double* wrow = pw.grad.data() + p * m;
          for (std::size_t j = 0; j < m; ++j) wrow[j] += xip * grow[j];
        }
      }
    }
    if (pb.requires_grad)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) pb.grad[j] += G[i * m + j];
  });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      });
}

Tensor exp(const Tensor& a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
  return unary(
      a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Tensor square(const Tensor& a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_op({1}, {s}, {a}, [](Node& self) {
    Node& p = *self.parents[0];
    const double g = self.grad[0];
    for (double& gi : p.grad) gi += g;
  });
}

Tensor mean(const Tensor& a) {
  const double inv = 1.0 / static_cast<double>(a.numel());
  return mul_scalar(sum(a), inv);
}

Tensor sum(const Tensor& a, int axis) {
  require(a.rank() == 2 && (axis == 0 || axis == 1), "sum(axis) expects a rank-2 tensor and axis 0 or 1");
  const std::size_t r = a.dim(0), c = a.dim(1);
  const auto av = a.values();
  if (axis == 1) {
    std::vector<double> out(r, 0.0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[i] += av[i * c + j];
    return make_op({r}, std::move(out), {a}, [r, c](Node& self) {
      Node& p = *self.parents[0];
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) p.grad[i * c + j] += self.grad[i];
    });
  }
  std::vector<double> out(c, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += av[i * c + j];
  return make_op({c}, std::move(out), {a}, [r, c](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) p.grad[i * c + j] += self.grad[j];
  });
}

namespace {

Shape drop_last(const Shape& s) {
  if (s.size() == 1) return {1};
  return Shape(s.begin(), s.end() - 1);
}

}  // namespace

Tensor logsumexp_last(const Tensor& a) {
  const std::size_t c = a.cols(), r = a.rows();
  const auto av = a.values();
  std::vector<double> out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = av.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    if (!std::isfinite(mx)) {
      out[i] = mx;
      continue;
    }
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(row[j] - mx);
    out[i] = mx + std::log(s);
  }
  return make_op(drop_last(a.shape()), std::move(out), {a}, [r, c](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < r; ++i) {
      const double g = self.grad[i];
      const double lse = self.value[i];
      if (g == 0.0 || !std::isfinite(lse)) continue;
      for (std::size_t j = 0; j < c; ++j) p.grad[i * c + j] += g * std::exp(p.value[i * c + j] - lse);
    }
  });
}

Tensor log_softmax_last(const Tensor& a) {
  const std::size_t c = a.cols(), r = a.rows();
  const auto av = a.values();
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = av.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(row[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = row[j] - lse;
  }
  return make_op(a.shape(), std::move(out), {a}, [r, c](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < r; ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < c; ++j) gs += self.grad[i * c + j];
      for (std::size_t j = 0; j < c; ++j) {
        const double prob = std::exp(self.value[i * c + j]);
        p.grad[i * c + j] += self.grad[i * c + j] - prob * gs;
      }
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw ContractError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_op(std::move(shape), std::move(out), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  });
}

namespace {

std::pair<std::size_t, std::size_t> as_matrix(const Tensor& t) {
  if (t.rank() > 2) throw ContractError("expected a rank-1 or rank-2 tensor, got " + shape_str(t.shape()));
  return {t.rows(), t.cols()};
}

}  // namespace

Tensor concat_rows(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const std::size_t c = as_matrix(parts[0]).second;
  std::size_t total = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    require(as_matrix(p).second == c, "concat_rows: column mismatch");
    offsets.push_back(total);
    total += p.rows();
  }
  std::vector<double> out;
  out.reserve(total * c);
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return make_op({total, c}, std::move(out), std::move(parents), [c, offsets](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      Node& p = *self.parents[k];
      if (!p.requires_grad) continue;
      const double* g = self.grad.data() + offsets[k] * c;
      for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += g[i];
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const std::size_t r = as_matrix(parts[0]).first;
  std::size_t total = 0;
  std::vector<std::size_t> widths, offsets;
  for (const auto& p : parts) {
    require(as_matrix(p).first == r, "concat_cols: row mismatch");
    offsets.push_back(total);
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(r * total);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto v = parts[k].values();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(v.data() + i * widths[k], widths[k], out.data() + i * total + offsets[k]);
  }
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return make_op({r, total}, std::move(out), std::move(parents), [r, total, widths, offsets](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      Node& p = *self.parents[k];
      if (!p.requires_grad) continue;
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < widths[k]; ++j)
          p.grad[i * widths[k] + j] += self.grad[i * total + offsets[k] + j];
    }
  });
}

Tensor concat_rows(std::initializer_list<Tensor> parts) {
  return concat_rows(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor concat_cols(std::initializer_list<Tensor> parts) {
  return concat_cols(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  const auto [r, c] = as_matrix(a);
  require(begin < end && end <= r, "slice_rows: bad range");
  std::vector<double> out(a.values().begin() + begin * c, a.values().begin() + end * c);
  return make_op({end - begin, c}, std::move(out), {a}, [begin, c](Node& self) {
    Node& p = *self.parents[0];
    double* g = p.grad.data() + begin * c;
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  const auto [r, c] = as_matrix(a);
  require(begin < end && end <= c, "slice_cols: bad range");
  const std::size_t w = end - begin;
  std::vector<double> out(r * w);
  const auto av = a.values();
  for (std::size_t i = 0; i < r; ++i) std::copy_n(av.data() + i * c + begin, w, out.data() + i * w);
  return make_op({r, w}, std::move(out), {a}, [r, c, w, begin](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) p.grad[i * c + begin + j] += self.grad[i * w + j];
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices) {
  const auto [r, c] = as_matrix(table);
  require(!indices.empty(), "gather_rows: no indices");
  std::vector<double> out(indices.size() * c);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= r) throw ContractError("gather_rows: index " + std::to_string(indices[i]) + " out of range");
    std::copy_n(table.values().data() + indices[i] * c, c, out.data() + i * c);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return make_op({indices.size(), c}, std::move(out), {table}, [idx, c](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) p.grad[idx[i] * c + j] += self.grad[i * c + j];
  });
}

}  // namespace redsds::nn

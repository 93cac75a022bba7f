// Copyright 2026 The Splitfed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "splitfed/tensor.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "splitfed/errors.h"

namespace splitfed {
namespace {

thread_local bool grad_mode_enabled = true;

void RequireSameShape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         ShapeToString(a.shape()) + " vs " +
                         ShapeToString(b.shape()));
  }
}

// Adds `g` into the input's gradient if that input tracks one.
void Accumulate(internal::Node& input, std::span<const double> g) {
  if (!input.requires_grad) return;
  auto& buf = input.EnsureGrad();
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

// C[m x n] += A[m x k] * B[k x n]
void GemmNN(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x k] += A[m x n] * B[k x n]^T
void GemmNT(const double* a, const double* b, double* c, std::size_t m,
            std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * n;
    for (std::size_t j = 0; j < k; ++j) {
      const double* brow = b + j * n;
      double acc = 0.0;
      for (std::size_t l = 0; l < n; ++l) acc += arow[l] * brow[l];
      c[i * k + j] += acc;
    }
  }
}

// C[k x n] += A[m x k]^T * B[m x n]
void GemmTN(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit SplitAt(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Tensor Unary(const Tensor& x, double (*f)(double), double (*df)(double, double)) {
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return MakeResult(x.shape(), std::move(out), {x},
                    [df](internal::Node& self) {
                      auto& input = *self.inputs[0];
                      if (!input.requires_grad) return;
                      auto& g = input.EnsureGrad();
                      for (std::size_t i = 0; i < g.size(); ++i) {
                        g[i] += self.grad[i] * df(input.data[i], self.data[i]);
                      }
                    });
}

}  // namespace

std::size_t NumElements(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::vector<double>& internal::Node::EnsureGrad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  return grad;
}

Tensor::Tensor() : Tensor(Shape{}, std::vector<double>{0.0}) {}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : node_(std::make_shared<internal::Node>()) {
  if (NumElements(shape) != data.size()) {
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + ShapeToString(shape));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(std::shared_ptr<internal::Node> node) : node_(std::move(node)) {}

Tensor Tensor::Zeros(Shape shape, bool requires_grad) {
  const std::size_t n = NumElements(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::Full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = NumElements(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::Scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<double>{value}, requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= node_->shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         ShapeToString(node_->shape));
  }
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->data.size(); }

std::span<const double> Tensor::data() const { return node_->data; }

std::span<double> Tensor::mutable_data() {
  if (!is_leaf()) {
    throw Error("mutable_data() on a tensor that is part of a graph");
  }
  return node_->data;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() on tensor of shape " + ShapeToString(shape()));
  }
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  if (!is_leaf()) throw Error("set_requires_grad() on a non-leaf tensor");
  node_->requires_grad = value;
}

bool Tensor::is_leaf() const { return !node_->backward; }

bool Tensor::has_grad() const { return !node_->grad.empty(); }

std::span<const double> Tensor::grad() const { return node_->grad; }

std::span<double> Tensor::mutable_grad() { return node_->EnsureGrad(); }

void Tensor::ZeroGrad() { node_->grad.clear(); }

Tensor Tensor::Detach() const { return Tensor(shape(), node_->data, false); }

NoGradGuard::NoGradGuard() : previous_(grad_mode_enabled) {
  grad_mode_enabled = false;
}

NoGradGuard::~NoGradGuard() { grad_mode_enabled = previous_; }

bool GradModeEnabled() { return grad_mode_enabled; }

Tensor MakeResult(Shape shape, std::vector<double> data,
                  std::vector<Tensor> inputs, internal::BackwardFn backward) {
  auto node = std::make_shared<internal::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  const bool track =
      grad_mode_enabled &&
      std::any_of(inputs.begin(), inputs.end(),
                  [](const Tensor& t) { return t.requires_grad(); });
  if (track) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const auto& t : inputs) node->inputs.push_back(t.impl());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

void Backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw DimensionError("backward() needs a scalar loss, got " +
                         ShapeToString(loss.shape()));
  }
  const std::vector<double> seed{1.0};
  Backward(std::span<const Tensor>(&loss, 1),
           std::span<const std::vector<double>>(&seed, 1));
}

void Backward(std::span<const Tensor> roots,
              std::span<const std::vector<double>> seeds) {
  if (roots.size() != seeds.size()) {
    throw DimensionError("backward(): roots and seeds differ in count");
  }
  // Iterative post-order DFS gives a topological order over the graph.
  std::vector<internal::Node*> order;
  std::unordered_set<internal::Node*> visited;
  std::vector<std::pair<internal::Node*, std::size_t>> stack;
  for (const auto& root : roots) {
    internal::Node* r = root.impl().get();
    if (!r->requires_grad || visited.count(r)) continue;
    visited.insert(r);
    stack.emplace_back(r, 0);
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->inputs.size()) {
        internal::Node* child = node->inputs[next++].get();
        if (child->requires_grad && !visited.count(child)) {
          visited.insert(child);
          stack.emplace_back(child, 0);
        }
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }
  for (std::size_t i = 0; i < roots.size(); ++i) {
    internal::Node& r = *roots[i].impl();
    if (seeds[i].size() != r.data.size()) {
      throw DimensionError("backward(): seed size " +
                           std::to_string(seeds[i].size()) +
                           " does not match root " + ShapeToString(r.shape));
    }
    Accumulate(r, seeds[i]);
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    internal::Node& node = **it;
    if (node.backward && !node.grad.empty()) node.backward(node);
  }
  // The graph is single-use: drop edges and intermediate gradients.
  for (internal::Node* node : order) {
    if (node->backward) {
      node->backward = nullptr;
      node->inputs.clear();
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
}

Tensor Add(const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "add");
  const auto x = a.data();
  const auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return MakeResult(a.shape(), std::move(out), {a, b},
                    [](internal::Node& self) {
                      Accumulate(*self.inputs[0], self.grad);
                      Accumulate(*self.inputs[1], self.grad);
                    });
}

Tensor Sub(const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "sub");
  const auto x = a.data();
  const auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return MakeResult(a.shape(), std::move(out), {a, b},
                    [](internal::Node& self) {
                      Accumulate(*self.inputs[0], self.grad);
                      auto& rhs = *self.inputs[1];
                      if (!rhs.requires_grad) return;
                      auto& g = rhs.EnsureGrad();
                      for (std::size_t i = 0; i < g.size(); ++i) {
                        g[i] -= self.grad[i];
                      }
                    });
}

Tensor Mul(const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "mul");
  const auto x = a.data();
  const auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return MakeResult(a.shape(), std::move(out), {a, b},
                    [](internal::Node& self) {
                      auto& lhs = *self.inputs[0];
                      auto& rhs = *self.inputs[1];
                      if (lhs.requires_grad) {
                        auto& g = lhs.EnsureGrad();
                        for (std::size_t i = 0; i < g.size(); ++i) {
                          g[i] += self.grad[i] * rhs.data[i];
                        }
                      }
                      if (rhs.requires_grad) {
                        auto& g = rhs.EnsureGrad();
                        for (std::size_t i = 0; i < g.size(); ++i) {
                          g[i] += self.grad[i] * lhs.data[i];
                        }
                      }
                    });
}

Tensor Scale(const Tensor& a, double factor) {
  const auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * factor;
  return MakeResult(a.shape(), std::move(out), {a},
                    [factor](internal::Node& self) {
                      auto& in = *self.inputs[0];
                      if (!in.requires_grad) return;
                      auto& g = in.EnsureGrad();
                      for (std::size_t i = 0; i < g.size(); ++i) {
                        g[i] += self.grad[i] * factor;
                      }
                    });
}

Tensor AddConstant(const Tensor& a, std::span<const double> constant) {
  if (constant.size() != a.numel()) {
    throw DimensionError("add_constant: field size mismatch for " +
                         ShapeToString(a.shape()));
  }
  const auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + constant[i];
  return MakeResult(a.shape(), std::move(out), {a}, [](internal::Node& self) {
    Accumulate(*self.inputs[0], self.grad);
  });
}

Tensor AddBias(const Tensor& x, const Tensor& bias) {
  if (bias.rank() != 1 || x.rank() == 0 || x.shape().back() != bias.dim(0)) {
    throw DimensionError("add_bias: " + ShapeToString(x.shape()) + " + " +
                         ShapeToString(bias.shape()));
  }
  const std::size_t n = bias.dim(0);
  const auto xv = x.data();
  const auto bv = bias.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] + bv[i % n];
  return MakeResult(x.shape(), std::move(out), {x, bias},
                    [n](internal::Node& self) {
                      Accumulate(*self.inputs[0], self.grad);
                      auto& b = *self.inputs[1];
                      if (!b.requires_grad) return;
                      auto& g = b.EnsureGrad();
                      for (std::size_t i = 0; i < self.grad.size(); ++i) {
                        g[i % n] += self.grad[i];
                      }
                    });
}

Tensor MatMul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: " + ShapeToString(a.shape()) + " * " +
                         ShapeToString(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  GemmNN(a.data().data(), b.data().data(), out.data(), m, k, n);
  return MakeResult({m, n}, std::move(out), {a, b},
                    [m, k, n](internal::Node& self) {
                      auto& lhs = *self.inputs[0];
                      auto& rhs = *self.inputs[1];
                      if (lhs.requires_grad) {
                        GemmNT(self.grad.data(), rhs.data.data(),
                               lhs.EnsureGrad().data(), m, n, k);
                      }
                      if (rhs.requires_grad) {
                        GemmTN(lhs.data.data(), self.grad.data(),
                               rhs.EnsureGrad().data(), m, k, n);
                      }
                    });
}

Tensor Linear(const Tensor& x, const Tensor& w) {
  if (x.rank() == 0 || w.rank() != 2 || x.shape().back() != w.dim(0)) {
    throw DimensionError("linear: " + ShapeToString(x.shape()) + " * " +
                         ShapeToString(w.shape()));
  }
  const std::size_t k = w.dim(0), n = w.dim(1);
  const std::size_t rows = x.numel() / k;
  Shape out_shape = x.shape();
  out_shape.back() = n;
  std::vector<double> out(rows * n, 0.0);
  GemmNN(x.data().data(), w.data().data(), out.data(), rows, k, n);
  return MakeResult(std::move(out_shape), std::move(out), {x, w},
                    [rows, k, n](internal::Node& self) {
                      auto& lhs = *self.inputs[0];
                      auto& rhs = *self.inputs[1];
                      if (lhs.requires_grad) {
                        GemmNT(self.grad.data(), rhs.data.data(),
                               lhs.EnsureGrad().data(), rows, n, k);
                      }
                      if (rhs.requires_grad) {
                        GemmTN(lhs.data.data(), self.grad.data(),
                               rhs.EnsureGrad().data(), rows, k, n);
                      }
                    });
}

Tensor BatchMatMul(const Tensor& a, const Tensor& b, bool transpose_b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0)) {
    throw DimensionError("batch_matmul: " + ShapeToString(a.shape()) + " * " +
                         ShapeToString(b.shape()));
  }
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  if ((transpose_b ? b.dim(2) : b.dim(1)) != k) {
    throw DimensionError("batch_matmul: inner dimensions differ for " +
                         ShapeToString(a.shape()) + " * " +
                         ShapeToString(b.shape()));
  }
  std::vector<double> out(batch * m * n, 0.0);
  const double* av = a.data().data();
  const double* bv = b.data().data();
  for (std::size_t s = 0; s < batch; ++s) {
    if (transpose_b) {
      GemmNT(av + s * m * k, bv + s * n * k, out.data() + s * m * n, m, k, n);
    } else {
      GemmNN(av + s * m * k, bv + s * k * n, out.data() + s * m * n, m, k, n);
    }
  }
  return MakeResult(
      {batch, m, n}, std::move(out), {a, b},
      [batch, m, k, n, transpose_b](internal::Node& self) {
        auto& lhs = *self.inputs[0];
        auto& rhs = *self.inputs[1];
        const double* g = self.grad.data();
        for (std::size_t s = 0; s < batch; ++s) {
          const double* gs = g + s * m * n;
          if (lhs.requires_grad) {
            double* ga = lhs.EnsureGrad().data() + s * m * k;
            if (transpose_b) {
              // dA = dC * B with B stored [n x k]
              GemmNN(gs, rhs.data.data() + s * n * k, ga, m, n, k);
            } else {
              GemmNT(gs, rhs.data.data() + s * k * n, ga, m, n, k);
            }
          }
          if (rhs.requires_grad) {
            const double* as = lhs.data.data() + s * m * k;
            if (transpose_b) {
              // dB[n x k] = dC^T * A
              GemmTN(gs, as, rhs.EnsureGrad().data() + s * n * k, m, n, k);
            } else {
              GemmTN(as, gs, rhs.EnsureGrad().data() + s * k * n, m, k, n);
            }
          }
        }
      });
}

Tensor Activate(const Tensor& x, Activation kind) {
  switch (kind) {
    case Activation::kTanh:
      return Tanh(x);
    case Activation::kGelu:
      return Gelu(x);
    case Activation::kElu:
      return Elu(x);
  }
  throw ConfigError("unknown activation");
}

Tensor Tanh(const Tensor& x) {
  return Unary(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor Gelu(const Tensor& x) {
  return Unary(
      x,
      [](double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); },
      [](double v, double) {
        const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
        const double pdf = std::exp(-0.5 * v * v) /
                           std::sqrt(2.0 * std::numbers::pi);
        return cdf + v * pdf;
      });
}

Tensor Elu(const Tensor& x) {
  return Unary(
      x, [](double v) { return v > 0.0 ? v : std::expm1(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : std::exp(v); });
}

Tensor Exp(const Tensor& x) {
  return Unary(
      x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor Square(const Tensor& x) {
  return Unary(
      x, [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

Tensor Sum(const Tensor& x) {
  const auto v = x.data();
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  return MakeResult({}, {total}, {x}, [](internal::Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.EnsureGrad();
    for (double& gi : g) gi += self.grad[0];
  });
}

Tensor Mean(const Tensor& x) {
  if (x.numel() == 0) throw DimensionError("mean of an empty tensor");
  return Scale(Sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor MeanSquaredError(const Tensor& prediction, const Tensor& target) {
  RequireSameShape(prediction, target, "mse");
  return Mean(Square(Sub(prediction, target)));
}

Tensor LogMeanExp(const Tensor& x) {
  const auto v = x.data();
  if (v.empty()) throw DimensionError("log_mean_exp of an empty tensor");
  const double peak = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(peak)) {
    throw NumericError("log_mean_exp: non-finite input");
  }
  double acc = 0.0;
  for (double e : v) acc += std::exp(e - peak);
  const double value = peak + std::log(acc / static_cast<double>(v.size()));
  return MakeResult({}, {value}, {x}, [peak, acc](internal::Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.EnsureGrad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[0] * std::exp(in.data[i] - peak) / acc;
    }
  });
}

Tensor Reshape(const Tensor& x, Shape shape) {
  if (NumElements(shape) != x.numel()) {
    throw DimensionError("reshape " + ShapeToString(x.shape()) + " -> " +
                         ShapeToString(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return MakeResult(std::move(shape), std::move(out), {x},
                    [](internal::Node& self) {
                      Accumulate(*self.inputs[0], self.grad);
                    });
}

Tensor Slice(const Tensor& x, std::size_t axis, std::size_t start,
             std::size_t length) {
  if (axis >= x.rank() || start + length > x.dim(axis)) {
    throw DimensionError("slice [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") on axis " +
                         std::to_string(axis) + " of " +
                         ShapeToString(x.shape()));
  }
  const AxisSplit s = SplitAt(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  std::vector<double> out(s.outer * length * s.inner);
  const double* src = x.data().data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(src + (o * s.extent + start) * s.inner, length * s.inner,
                out.data() + o * length * s.inner);
  }
  return MakeResult(std::move(out_shape), std::move(out), {x},
                    [s, start, length](internal::Node& self) {
                      auto& in = *self.inputs[0];
                      if (!in.requires_grad) return;
                      auto& g = in.EnsureGrad();
                      for (std::size_t o = 0; o < s.outer; ++o) {
                        const double* gs = self.grad.data() + o * length * s.inner;
                        double* gd = g.data() + (o * s.extent + start) * s.inner;
                        for (std::size_t i = 0; i < length * s.inner; ++i) {
                          gd[i] += gs[i];
                        }
                      }
                    });
}

Tensor Concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  const Shape& ref = parts[0].shape();
  if (axis >= ref.size()) throw DimensionError("concat axis out of range");
  Shape out_shape = ref;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    Shape probe = p.shape();
    if (probe.size() != ref.size()) {
      throw DimensionError("concat: rank mismatch");
    }
    out_shape[axis] += probe[axis];
    probe[axis] = ref[axis];
    if (probe != ref) {
      throw DimensionError("concat: " + ShapeToString(p.shape()) +
                           " incompatible with " + ShapeToString(ref));
    }
  }
  const AxisSplit total = SplitAt(out_shape, axis);
  std::vector<double> out(NumElements(out_shape));
  std::vector<std::size_t> extents;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t ext = p.dim(axis);
    const double* src = p.data().data();
    for (std::size_t o = 0; o < total.outer; ++o) {
      std::copy_n(src + o * ext * total.inner, ext * total.inner,
                  out.data() + (o * total.extent + offset) * total.inner);
    }
    extents.push_back(ext);
    offset += ext;
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return MakeResult(
      std::move(out_shape), std::move(out), std::move(inputs),
      [total, extents](internal::Node& self) {
        std::size_t off = 0;
        for (std::size_t idx = 0; idx < extents.size(); ++idx) {
          auto& in = *self.inputs[idx];
          const std::size_t ext = extents[idx];
          if (in.requires_grad) {
            auto& g = in.EnsureGrad();
            for (std::size_t o = 0; o < total.outer; ++o) {
              const double* gs =
                  self.grad.data() + (o * total.extent + off) * total.inner;
              double* gd = g.data() + o * ext * total.inner;
              for (std::size_t i = 0; i < ext * total.inner; ++i) gd[i] += gs[i];
            }
          }
          off += ext;
        }
      });
}

Tensor MeanRepeat(const Tensor& x, std::size_t count) {
  if (x.rank() != 3) {
    throw DimensionError("mean_repeat expects [B x L x C], got " +
                         ShapeToString(x.shape()));
  }
  const std::size_t batch = x.dim(0), len = x.dim(1), ch = x.dim(2);
  const double* src = x.data().data();
  std::vector<double> means(batch * ch, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t c = 0; c < ch; ++c) {
        means[b * ch + c] += src[(b * len + t) * ch + c];
      }
    }
  }
  for (double& m : means) m /= static_cast<double>(len);
  std::vector<double> out(batch * count * ch);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < count; ++t) {
      std::copy_n(means.data() + b * ch, ch, out.data() + (b * count + t) * ch);
    }
  }
  return MakeResult(
      {batch, count, ch}, std::move(out), {x},
      [batch, len, ch, count](internal::Node& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad) return;
        auto& g = in.EnsureGrad();
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t c = 0; c < ch; ++c) {
            double acc = 0.0;
            for (std::size_t t = 0; t < count; ++t) {
              acc += self.grad[(b * count + t) * ch + c];
            }
            acc /= static_cast<double>(len);
            for (std::size_t t = 0; t < len; ++t) g[(b * len + t) * ch + c] += acc;
          }
        }
      });
}

Tensor Conv1d(const Tensor& x, const Tensor& kernel) {
  if (x.rank() == 2) {
    Tensor batched = Reshape(x, {1, x.dim(0), x.dim(1)});
    Tensor out = Conv1d(batched, kernel);
    return Reshape(out, {out.dim(1), out.dim(2)});
  }
  if (x.rank() != 3 || kernel.rank() != 3 || kernel.dim(1) != x.dim(2)) {
    throw DimensionError("conv1d: input " + ShapeToString(x.shape()) +
                         " kernel " + ShapeToString(kernel.shape()));
  }
  const std::size_t width = kernel.dim(0);
  if (width % 2 == 0) {
    throw ConfigError("conv1d kernel width must be odd, got " +
                      std::to_string(width));
  }
  const std::size_t batch = x.dim(0), len = x.dim(1), cin = x.dim(2);
  const std::size_t cout = kernel.dim(2);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(width / 2);
  // Source row for output position t and tap j, clamped at both ends.
  auto src_row = [len, pad](std::size_t t, std::size_t j) {
    std::ptrdiff_t r = static_cast<std::ptrdiff_t>(t + j) - pad;
    r = std::clamp<std::ptrdiff_t>(r, 0, static_cast<std::ptrdiff_t>(len) - 1);
    return static_cast<std::size_t>(r);
  };
  std::vector<double> out(batch * len * cout, 0.0);
  const double* xv = x.data().data();
  const double* kv = kernel.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < len; ++t) {
      double* orow = out.data() + (b * len + t) * cout;
      for (std::size_t j = 0; j < width; ++j) {
        const double* xrow = xv + (b * len + src_row(t, j)) * cin;
        GemmNN(xrow, kv + j * cin * cout, orow, 1, cin, cout);
      }
    }
  }
  return MakeResult(
      {batch, len, cout}, std::move(out), {x, kernel},
      [=](internal::Node& self) {
        auto& in = *self.inputs[0];
        auto& ker = *self.inputs[1];
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t t = 0; t < len; ++t) {
            const double* grow = self.grad.data() + (b * len + t) * cout;
            for (std::size_t j = 0; j < width; ++j) {
              const std::size_t r = src_row(t, j);
              if (in.requires_grad) {
                GemmNT(grow, ker.data.data() + j * cin * cout,
                       in.EnsureGrad().data() + (b * len + r) * cin, 1, cout,
                       cin);
              }
              if (ker.requires_grad) {
                GemmTN(in.data.data() + (b * len + r) * cin, grow,
                       ker.EnsureGrad().data() + j * cin * cout, 1, cin, cout);
              }
            }
          }
        }
      });
}

Tensor MovingAverage(const Tensor& x, std::size_t width) {
  if (x.rank() != 3) {
    throw DimensionError("moving_average expects [B x L x C], got " +
                         ShapeToString(x.shape()));
  }
  if (width % 2 == 0) {
    throw ConfigError("moving-average width must be odd, got " +
                      std::to_string(width));
  }
  const std::size_t batch = x.dim(0), len = x.dim(1), ch = x.dim(2);
  if (width > len) {
    throw ConfigError("moving-average width " + std::to_string(width) +
                      " exceeds series length " + std::to_string(len));
  }
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(width / 2);
  const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(len) - 1;
  const double inv = 1.0 / static_cast<double>(width);
  const double* xv = x.data().data();
  std::vector<double> out(x.numel(), 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < len; ++t) {
      double* orow = out.data() + (b * len + t) * ch;
      for (std::ptrdiff_t j = -half; j <= half; ++j) {
        const std::ptrdiff_t r =
            std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(t) + j, 0, last);
        const double* xrow = xv + (b * len + static_cast<std::size_t>(r)) * ch;
        for (std::size_t c = 0; c < ch; ++c) orow[c] += xrow[c];
      }
      for (std::size_t c = 0; c < ch; ++c) orow[c] *= inv;
    }
  }
  return MakeResult(
      x.shape(), std::move(out), {x}, [=](internal::Node& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad) return;
        auto& g = in.EnsureGrad();
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t t = 0; t < len; ++t) {
            const double* grow = self.grad.data() + (b * len + t) * ch;
            for (std::ptrdiff_t j = -half; j <= half; ++j) {
              const std::ptrdiff_t r = std::clamp<std::ptrdiff_t>(
                  static_cast<std::ptrdiff_t>(t) + j, 0, last);
              double* gd = g.data() + (b * len + static_cast<std::size_t>(r)) * ch;
              for (std::size_t c = 0; c < ch; ++c) gd[c] += grow[c] * inv;
            }
          }
        }
      });
}

}  // namespace splitfed

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

#ifndef SPLITFED_TENSOR_H_
#define SPLITFED_TENSOR_H_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace splitfed {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);

namespace internal {

struct Node;
using BackwardFn = std::function<void(Node& self)>;

// One vertex of the reverse-mode graph. Leaves have no `backward`.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;

  // Returns the gradient buffer, zero-filling it on first use.
  std::vector<double>& EnsureGrad();
};

}  // namespace internal

// Dense row-major double tensor with optional gradient tracking.
//
// A Tensor is a cheap handle; copies share the same storage. Ops never
// mutate their inputs, so a tensor that feeds a graph stays immutable until
// Backward() consumes the graph.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);
  explicit Tensor(std::shared_ptr<internal::Node> node);

  static Tensor Zeros(Shape shape, bool requires_grad = false);
  static Tensor Full(Shape shape, double value, bool requires_grad = false);
  static Tensor Scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Only leaves may be written in place (optimizer updates, noise fields).
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void ZeroGrad();

  // A new leaf holding a copy of the values, detached from any graph.
  Tensor Detach() const;

  const std::shared_ptr<internal::Node>& impl() const { return node_; }

 private:
  std::shared_ptr<internal::Node> node_;
};

// Complex values stored as two real tensors of identical shape.
struct ComplexTensor {
  Tensor real;
  Tensor imag;

  const Shape& shape() const { return real.shape(); }
};

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool GradModeEnabled();

// Builds an op result. When grad mode is on and any input requires a
// gradient, the node is linked to its inputs and `backward` is kept.
Tensor MakeResult(Shape shape, std::vector<double> data,
                  std::vector<Tensor> inputs, internal::BackwardFn backward);

// Reverse-mode sweep from a scalar loss. Populates grad() on every reachable
// tensor that requires a gradient and releases the consumed graph.
void Backward(const Tensor& loss);

// Multi-root variant: each root is seeded with the matching upstream
// gradient (same element count as the root).
void Backward(std::span<const Tensor> roots,
              std::span<const std::vector<double>> seeds);

// Elementwise ops (identical shapes).
Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);
Tensor Scale(const Tensor& a, double factor);
// Adds a constant field; gradient flows to `a` unchanged.
Tensor AddConstant(const Tensor& a, std::span<const double> constant);

// x[..., n] + bias[n]
Tensor AddBias(const Tensor& x, const Tensor& bias);

// a[m x k] * b[k x n]
Tensor MatMul(const Tensor& a, const Tensor& b);
// x[..., k] * w[k x n] -> [..., n]
Tensor Linear(const Tensor& x, const Tensor& w);
// a[B x m x k] * b[B x k x n], or b[B x n x k] transposed when transpose_b.
Tensor BatchMatMul(const Tensor& a, const Tensor& b, bool transpose_b = false);

enum class Activation { kTanh, kGelu, kElu };

Tensor Activate(const Tensor& x, Activation kind);
Tensor Tanh(const Tensor& x);
Tensor Gelu(const Tensor& x);
Tensor Elu(const Tensor& x);
Tensor Exp(const Tensor& x);
Tensor Square(const Tensor& x);

// Reductions to a scalar.
Tensor Sum(const Tensor& x);
Tensor Mean(const Tensor& x);
Tensor MeanSquaredError(const Tensor& prediction, const Tensor& target);
// log(mean(exp(x))) evaluated with max subtraction.
Tensor LogMeanExp(const Tensor& x);

Tensor Reshape(const Tensor& x, Shape shape);
Tensor Slice(const Tensor& x, std::size_t axis, std::size_t start,
             std::size_t length);
Tensor Concat(std::span<const Tensor> parts, std::size_t axis);

// x[B x L x C] -> [B x count x C], every row holding the mean over L.
Tensor MeanRepeat(const Tensor& x, std::size_t count);

// Length-preserving convolution over axis 1 with replicate padding.
// x[B x L x Cin] (or [L x Cin]), kernel[W x Cin x Cout], W odd.
Tensor Conv1d(const Tensor& x, const Tensor& kernel);

// Replicate-padded moving average over axis 1 of x[B x L x C]; width odd.
Tensor MovingAverage(const Tensor& x, std::size_t width);

}  // namespace splitfed

#endif  // SPLITFED_TENSOR_H_

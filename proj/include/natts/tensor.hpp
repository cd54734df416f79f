// Copyright 2026 The natts Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense float64 tensors (rank 0 to 2) with reverse-mode differentiation.
//
// Every op is functional: it returns a new tensor and never mutates its
// inputs. When grad mode is on and any input requires a gradient, the result
// records its parents and a backward rule. Backward() walks the recorded graph
// in reverse topological order and accumulates into every node that requires
// a gradient; leaves keep their gradient until ZeroGrad().
//
// Binary elementwise ops broadcast numpy-style over rank <= 2 shapes: a rank-1
// tensor of length n behaves as a 1 x n row and a scalar as 1 x 1.

#ifndef NATTS_TENSOR_HPP_
#define NATTS_TENSOR_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "natts/rng.hpp"

namespace natts {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::string ShapeString(const Shape& shape);
std::size_t NumElements(const Shape& shape);

namespace detail {
struct Node;
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor FromVector(Shape shape, std::vector<double> values,
                           bool requires_grad = false);
  static Tensor Full(Shape shape, double value, bool requires_grad = false);
  static Tensor Zeros(Shape shape, bool requires_grad = false) {
    return Full(std::move(shape), 0.0, requires_grad);
  }
  static Tensor Scalar(double value, bool requires_grad = false);
  static Tensor Matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values, bool requires_grad = false) {
    return FromVector({rows, cols}, std::move(values), requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  /// Rows/cols under the broadcasting view (rank 1 = one row).
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const;
  double item() const;
  double at(std::size_t i) const { return values()[i]; }
  double at(std::size_t r, std::size_t c) const {
    return values()[r * cols() + c];
  }
  std::vector<double> ToVector() const {
    auto v = values();
    return {v.begin(), v.end()};
  }

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  /// Accumulated gradient; empty span if none was produced.
  std::span<const double> grad() const;
  void ZeroGrad() const;

  /// Same values, cut from the graph.
  Tensor Detach() const;

  /// Identity of the underlying node (for maps keyed by graph node).
  const detail::Node* node() const { return node_.get(); }

 private:
  friend Tensor MakeOpResult(Shape, std::vector<double>,
                             std::vector<Tensor>,
                             std::function<void(detail::Node&)>);
  friend void Backward(const Tensor&, bool);
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::Node> node_;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  /// Grad buffer of parent i, allocated on demand; nullptr when that parent
  /// does not take gradients.
  std::vector<double>* ParentGrad(std::size_t i);
};

}  // namespace detail

/// Builds an op result. The backward rule receives the result node (with
/// its accumulated grad) and pushes into parents via Node::ParentGrad.
Tensor MakeOpResult(Shape shape, std::vector<double> value,
                    std::vector<Tensor> inputs,
                    std::function<void(detail::Node&)> backward);

/// Reverse-mode pass from a scalar loss. `reverse_parent_order` visits
/// parents in the opposite order during the topological sort, which yields
/// a different but equally valid traversal (used to check order
/// independence).
void Backward(const Tensor& loss, bool reverse_parent_order = false);

bool GradEnabled();

/// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// ---- ops -------------------------------------------------------------------

Tensor MatMul(const Tensor& a, const Tensor& b);
Tensor Transpose(const Tensor& x);
Tensor Reshape(const Tensor& x, Shape shape);

Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);
Tensor Div(const Tensor& a, const Tensor& b);
Tensor Minimum(const Tensor& a, const Tensor& b);
Tensor Scale(const Tensor& x, double factor);
Tensor AddScalar(const Tensor& x, double offset);
Tensor Neg(const Tensor& x);

Tensor Relu(const Tensor& x);
Tensor Tanh(const Tensor& x);
Tensor Sigmoid(const Tensor& x);
Tensor Softplus(const Tensor& x);
Tensor Exp(const Tensor& x);
Tensor Log(const Tensor& x);
Tensor Square(const Tensor& x);
Tensor Sqrt(const Tensor& x);
Tensor Abs(const Tensor& x);

/// Reductions keep the reduced axis with size 1 (rank is preserved).
Tensor Sum(const Tensor& x, std::size_t axis);
Tensor Mean(const Tensor& x, std::size_t axis);
Tensor SumAll(const Tensor& x);
Tensor MeanAll(const Tensor& x);
/// Inclusive prefix sum along axis 0 (rank 1) or down the rows (rank 2).
Tensor CumSum(const Tensor& x);

/// Concatenation along the last axis; all inputs need equal row counts.
Tensor ConcatCols(std::span<const Tensor> parts);
/// Concatenation along axis 0 of rank-2 inputs with equal column counts.
Tensor ConcatRows(std::span<const Tensor> parts);
Tensor SliceRows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor SliceCols(const Tensor& x, std::size_t begin, std::size_t end);

Tensor EmbeddingLookup(const Tensor& table, std::span<const int> ids);
/// Rows of a [T, C] input gathered into [T, kernel * C] windows centred on
/// each row with zero padding (kernel odd), so that a matmul yields a
/// same-padded 1-D convolution.
Tensor Im2Col(const Tensor& x, std::size_t kernel);
/// Same-padded 1-D convolution over rows: x [T, Cin], weight
/// [kernel * Cin, Cout], bias [Cout].
Tensor Conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Inverted dropout. Rate 0 returns the input unchanged. The mask is drawn
/// from `rng` in element order.
Tensor Dropout(const Tensor& x, double rate, Rng rng);
/// Normalises each row to zero mean and unit variance, then applies the
/// per-column gain and bias.
Tensor LayerNorm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                 double eps = 1e-5);
/// Row-wise softmax over the last axis.
Tensor Softmax(const Tensor& x);
/// Normal density N(t; mean, variance), broadcasting over all three inputs.
Tensor GaussianPdf(const Tensor& t, const Tensor& mean, const Tensor& variance);
Tensor GaussianLogPdf(const Tensor& t, const Tensor& mean,
                      const Tensor& variance);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return Add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return Sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return Mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return Div(a, b); }
inline Tensor operator-(const Tensor& x) { return Neg(x); }

}  // namespace natts

#endif  // NATTS_TENSOR_HPP_

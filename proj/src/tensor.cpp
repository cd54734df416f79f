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

#include "natts/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace natts {

namespace {

thread_local bool g_grad_enabled = true;

struct View2 {
  std::size_t rows;
  std::size_t cols;
};

View2 AsView(const Shape& s) {
  switch (s.size()) {
    case 0:
      return {1, 1};
    case 1:
      return {1, s[0]};
    case 2:
      return {s[0], s[1]};
    default:
      throw Error("tensor rank " + std::to_string(s.size()) +
                  " not supported (max 2): " + ShapeString(s));
  }
}

Shape CheckShape(Shape shape) {
  if (shape.size() > 2) {
    throw Error("tensor rank above 2 not supported: " + ShapeString(shape));
  }
  return shape;
}

std::string PairMessage(const char* op, const Shape& a, const Shape& b) {
  return std::string(op) + ": incompatible shapes " + ShapeString(a) + " and " +
         ShapeString(b);
}

struct Broadcast {
  View2 a, b, out;
  Shape out_shape;
};

Broadcast MakeBroadcast(const char* op, const Shape& sa, const Shape& sb) {
  Broadcast bc;
  bc.a = AsView(sa);
  bc.b = AsView(sb);
  auto merge = [&](std::size_t x, std::size_t y) {
    if (x == y) return x;
    if (x == 1) return y;
    if (y == 1) return x;
    throw Error(PairMessage(op, sa, sb));
  };
  bc.out = {merge(bc.a.rows, bc.b.rows), merge(bc.a.cols, bc.b.cols)};
  const std::size_t rank = std::max(sa.size(), sb.size());
  if (rank == 0) {
    bc.out_shape = {};
  } else if (rank == 1) {
    if (bc.out.rows != 1) {
      bc.out_shape = {bc.out.rows, bc.out.cols};
    } else {
      bc.out_shape = {bc.out.cols};
    }
  } else {
    bc.out_shape = {bc.out.rows, bc.out.cols};
  }
  return bc;
}

inline std::size_t BIndex(const View2& v, std::size_t i, std::size_t j) {
  return (v.rows == 1 ? 0 : i) * v.cols + (v.cols == 1 ? 0 : j);
}

// Elementwise binary op with broadcasting. `da`/`db` return the partial
// derivative of the output w.r.t. each operand given (x, y, out).
template <typename F, typename DA, typename DB>
Tensor BinaryOp(const char* name, const Tensor& a, const Tensor& b, F f, DA da,
                DB db) {
  Broadcast bc = MakeBroadcast(name, a.shape(), b.shape());
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(bc.out.rows * bc.out.cols);
  for (std::size_t i = 0; i < bc.out.rows; ++i) {
    for (std::size_t j = 0; j < bc.out.cols; ++j) {
      out[i * bc.out.cols + j] =
          f(av[BIndex(bc.a, i, j)], bv[BIndex(bc.b, i, j)]);
    }
  }
  return MakeOpResult(
      bc.out_shape, std::move(out), {a, b}, [bc, da, db](detail::Node& self) {
        const auto& xa = self.parents[0]->value;
        const auto& xb = self.parents[1]->value;
        std::vector<double>* ga = self.ParentGrad(0);
        std::vector<double>* gb = self.ParentGrad(1);
        for (std::size_t i = 0; i < bc.out.rows; ++i) {
          for (std::size_t j = 0; j < bc.out.cols; ++j) {
            const std::size_t o = i * bc.out.cols + j;
            const std::size_t ia = BIndex(bc.a, i, j);
            const std::size_t ib = BIndex(bc.b, i, j);
            const double g = self.grad[o];
            if (ga) (*ga)[ia] += g * da(xa[ia], xb[ib], self.value[o]);
            if (gb) (*gb)[ib] += g * db(xa[ia], xb[ib], self.value[o]);
          }
        }
      });
}

// Elementwise unary op; `df` receives (x, out).
template <typename F, typename DF>
Tensor UnaryOp(const Tensor& x, F f, DF df) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return MakeOpResult(x.shape(), std::move(out), {x}, [df](detail::Node& self) {
    std::vector<double>* gx = self.ParentGrad(0);
    if (!gx) return;
    const auto& xv = self.parents[0]->value;
    for (std::size_t i = 0; i < xv.size(); ++i) {
      (*gx)[i] += self.grad[i] * df(xv[i], self.value[i]);
    }
  });
}

View2 RequireMatrix(const char* op, const Tensor& x) {
  if (x.rank() != 2) {
    throw Error(std::string(op) + ": expected a rank-2 tensor, got " +
                ShapeString(x.shape()));
  }
  return {x.shape()[0], x.shape()[1]};
}

}  // namespace

std::string ShapeString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t NumElements(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

// ---- Node / Tensor ----------------------------------------------------------

std::vector<double>* detail::Node::ParentGrad(std::size_t i) {
  Node& p = *parents[i];
  if (!p.requires_grad) return nullptr;
  if (p.grad.empty()) p.grad.assign(p.value.size(), 0.0);
  return &p.grad;
}

Tensor Tensor::FromVector(Shape shape, std::vector<double> values,
                          bool requires_grad) {
  shape = CheckShape(std::move(shape));
  if (NumElements(shape) != values.size()) {
    throw Error("tensor data length " + std::to_string(values.size()) +
                " does not match shape " + ShapeString(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::Full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = NumElements(shape);
  return FromVector(std::move(shape), std::vector<double>(n, value),
                    requires_grad);
}

Tensor Tensor::Scalar(double value, bool requires_grad) {
  return FromVector({}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw Error("use of an undefined tensor");
  return node_->shape;
}

std::size_t Tensor::numel() const { return values().size(); }
std::size_t Tensor::rows() const { return AsView(shape()).rows; }
std::size_t Tensor::cols() const { return AsView(shape()).cols; }

std::span<const double> Tensor::values() const {
  if (!node_) throw Error("use of an undefined tensor");
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw Error("item() on tensor of shape " + ShapeString(shape()));
  }
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return node_ && !node_->backward; }
bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!node_) return {};
  return node_->grad;
}

void Tensor::ZeroGrad() const {
  if (node_) node_->grad.clear();
}

Tensor Tensor::Detach() const {
  return FromVector(shape(), ToVector(), false);
}

Tensor MakeOpResult(Shape shape, std::vector<double> value,
                    std::vector<Tensor> inputs,
                    std::function<void(detail::Node&)> backward) {
  auto node = std::make_shared<detail::Node>();
  node->shape = CheckShape(std::move(shape));
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(inputs.size());
      for (auto& in : inputs) node->parents.push_back(in.node_);
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

void Backward(const Tensor& loss, bool reverse_parent_order) {
  if (!loss.defined() || loss.numel() != 1) {
    throw Error("backward: loss must be a scalar, got shape " +
                (loss.defined() ? ShapeString(loss.shape()) : "undefined"));
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(loss.node_.get(), 0);
  visited.insert(loss.node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      const std::size_t k =
          reverse_parent_order ? node->parents.size() - 1 - next : next;
      ++next;
      detail::Node* p = node->parents[k].get();
      if (p->requires_grad && visited.insert(p).second) {
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  detail::Node* root = loss.node_.get();
  if (root->grad.empty()) root->grad.assign(1, 0.0);
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward && !n->grad.empty()) {
      n->backward(*n);
      // Interior gradients are no longer needed once propagated.
      if (n != root) std::vector<double>().swap(n->grad);
    }
  }
}

bool GradEnabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

// ---- linear algebra ---------------------------------------------------------

namespace {

// Four independent partial sums so the loop vectorises without reassociation
// flags; the summation order is fixed, so results stay deterministic.
double Dot(const double* x, const double* y, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    s0 += x[j] * y[j];
    s1 += x[j + 1] * y[j + 1];
    s2 += x[j + 2] * y[j + 2];
    s3 += x[j + 3] * y[j + 3];
  }
  for (; j < n; ++j) s0 += x[j] * y[j];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace

Tensor MatMul(const Tensor& a, const Tensor& b) {
  const View2 va = RequireMatrix("matmul", a);
  const View2 vb = RequireMatrix("matmul", b);
  if (va.cols != vb.rows) throw Error(PairMessage("matmul", a.shape(), b.shape()));
  const std::size_t m = va.rows, k = va.cols, n = vb.cols;
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(m * n, 0.0);
  // i-k-j order: every output element accumulates over k in the same order
  // no matter how many rows are multiplied at once.
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double x = av[i * k + p];
      const double* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += x * brow[j];
    }
  }
  return MakeOpResult({m, n}, std::move(out), {a, b},
                      [m, k, n](detail::Node& self) {
                        const auto& av = self.parents[0]->value;
                        const auto& bv = self.parents[1]->value;
                        const auto& g = self.grad;
                        if (auto* ga = self.ParentGrad(0)) {
                          for (std::size_t i = 0; i < m; ++i) {
                            for (std::size_t p = 0; p < k; ++p) {
                              const double* grow = g.data() + i * n;
                              const double* brow = bv.data() + p * n;
                              (*ga)[i * k + p] += Dot(grow, brow, n);
                            }
                          }
                        }
                        if (auto* gb = self.ParentGrad(1)) {
                          for (std::size_t i = 0; i < m; ++i) {
                            const double* grow = g.data() + i * n;
                            for (std::size_t p = 0; p < k; ++p) {
                              const double x = av[i * k + p];
                              double* gbrow = gb->data() + p * n;
                              for (std::size_t j = 0; j < n; ++j) {
                                gbrow[j] += x * grow[j];
                              }
                            }
                          }
                        }
                      });
}

Tensor Transpose(const Tensor& x) {
  const View2 v = RequireMatrix("transpose", x);
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < v.rows; ++i) {
    for (std::size_t j = 0; j < v.cols; ++j) out[j * v.rows + i] = xv[i * v.cols + j];
  }
  return MakeOpResult({v.cols, v.rows}, std::move(out), {x},
                      [v](detail::Node& self) {
                        auto* gx = self.ParentGrad(0);
                        if (!gx) return;
                        for (std::size_t i = 0; i < v.rows; ++i) {
                          for (std::size_t j = 0; j < v.cols; ++j) {
                            (*gx)[i * v.cols + j] += self.grad[j * v.rows + i];
                          }
                        }
                      });
}

Tensor Reshape(const Tensor& x, Shape shape) {
  if (NumElements(shape) != x.numel()) {
    throw Error(PairMessage("reshape", x.shape(), shape));
  }
  return MakeOpResult(std::move(shape), x.ToVector(), {x},
                      [](detail::Node& self) {
                        auto* gx = self.ParentGrad(0);
                        if (!gx) return;
                        for (std::size_t i = 0; i < gx->size(); ++i) {
                          (*gx)[i] += self.grad[i];
                        }
                      });
}

// ---- elementwise --------------------------------------------------------------

Tensor Add(const Tensor& a, const Tensor& b) {
  return BinaryOp(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor Sub(const Tensor& a, const Tensor& b) {
  return BinaryOp(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor Mul(const Tensor& a, const Tensor& b) {
  return BinaryOp(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor Div(const Tensor& a, const Tensor& b) {
  return BinaryOp(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double out) { return -out / y; });
}

Tensor Minimum(const Tensor& a, const Tensor& b) {
  // Ties send the gradient to the first operand.
  return BinaryOp(
      "minimum", a, b, [](double x, double y) { return std::min(x, y); },
      [](double x, double y, double) { return x <= y ? 1.0 : 0.0; },
      [](double x, double y, double) { return x <= y ? 0.0 : 1.0; });
}

Tensor Scale(const Tensor& x, double factor) {
  return UnaryOp(
      x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor AddScalar(const Tensor& x, double offset) {
  return UnaryOp(
      x, [offset](double v) { return v + offset; },
      [](double, double) { return 1.0; });
}

Tensor Neg(const Tensor& x) { return Scale(x, -1.0); }

Tensor Relu(const Tensor& x) {
  return UnaryOp(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor Tanh(const Tensor& x) {
  return UnaryOp(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

namespace {
inline double StableSigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}
}  // namespace

Tensor Sigmoid(const Tensor& x) {
  return UnaryOp(
      x, [](double v) { return StableSigmoid(v); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor Softplus(const Tensor& x) {
  return UnaryOp(
      x,
      [](double v) {
        return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
      },
      [](double v, double) { return StableSigmoid(v); });
}

Tensor Exp(const Tensor& x) {
  return UnaryOp(
      x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor Log(const Tensor& x) {
  return UnaryOp(
      x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor Square(const Tensor& x) {
  return UnaryOp(
      x, [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

Tensor Sqrt(const Tensor& x) {
  return UnaryOp(
      x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; });
}

Tensor Abs(const Tensor& x) {
  return UnaryOp(
      x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

// ---- reductions -------------------------------------------------------------

Tensor Sum(const Tensor& x, std::size_t axis) {
  const Shape& s = x.shape();
  if (axis >= std::max<std::size_t>(s.size(), 1)) {
    throw Error("sum: axis " + std::to_string(axis) + " out of range for " +
                ShapeString(s));
  }
  if (s.size() <= 1) return Reshape(SumAll(x), s.empty() ? Shape{} : Shape{1});
  const View2 v{s[0], s[1]};
  const auto xv = x.values();
  Shape out_shape = axis == 0 ? Shape{1, v.cols} : Shape{v.rows, 1};
  std::vector<double> out(axis == 0 ? v.cols : v.rows, 0.0);
  for (std::size_t i = 0; i < v.rows; ++i) {
    for (std::size_t j = 0; j < v.cols; ++j) {
      out[axis == 0 ? j : i] += xv[i * v.cols + j];
    }
  }
  return MakeOpResult(std::move(out_shape), std::move(out), {x},
                      [v, axis](detail::Node& self) {
                        auto* gx = self.ParentGrad(0);
                        if (!gx) return;
                        for (std::size_t i = 0; i < v.rows; ++i) {
                          for (std::size_t j = 0; j < v.cols; ++j) {
                            (*gx)[i * v.cols + j] += self.grad[axis == 0 ? j : i];
                          }
                        }
                      });
}

Tensor Mean(const Tensor& x, std::size_t axis) {
  const Shape& s = x.shape();
  const std::size_t n = s.empty() ? 1 : s[axis < s.size() ? axis : 0];
  return Scale(Sum(x, axis), 1.0 / static_cast<double>(n));
}

Tensor SumAll(const Tensor& x) {
  const auto xv = x.values();
  double total = 0.0;
  for (double v : xv) total += v;
  return MakeOpResult({}, {total}, {x}, [](detail::Node& self) {
    auto* gx = self.ParentGrad(0);
    if (!gx) return;
    for (auto& g : *gx) g += self.grad[0];
  });
}

Tensor MeanAll(const Tensor& x) {
  return Scale(SumAll(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor CumSum(const Tensor& x) {
  const View2 v = AsView(x.shape());
  const std::size_t len = x.rank() <= 1 ? v.cols : v.rows;
  const std::size_t width = x.rank() <= 1 ? 1 : v.cols;
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t c = 0; c < width; ++c) {
    double run = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      run += xv[i * width + c];
      out[i * width + c] = run;
    }
  }
  return MakeOpResult(x.shape(), std::move(out), {x},
                      [len, width](detail::Node& self) {
                        auto* gx = self.ParentGrad(0);
                        if (!gx) return;
                        for (std::size_t c = 0; c < width; ++c) {
                          double run = 0.0;
                          for (std::size_t i = len; i-- > 0;) {
                            run += self.grad[i * width + c];
                            (*gx)[i * width + c] += run;
                          }
                        }
                      });
}

// ---- structure ----------------------------------------------------------------

Tensor ConcatCols(std::span<const Tensor> parts) {
  if (parts.empty()) throw Error("concat: no inputs");
  const std::size_t rows = parts[0].rows();
  const bool rank1 = parts[0].rank() <= 1;
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows || (p.rank() <= 1) != rank1) {
      throw Error(PairMessage("concat", parts[0].shape(), p.shape()));
    }
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pv = parts[k].values();
    for (std::size_t i = 0; i < rows; ++i) {
      std::copy_n(pv.begin() + i * widths[k], widths[k],
                  out.begin() + i * total + offset);
    }
    offset += widths[k];
  }
  Shape shape = rank1 ? Shape{total} : Shape{rows, total};
  return MakeOpResult(std::move(shape), std::move(out),
                      std::vector<Tensor>(parts.begin(), parts.end()),
                      [rows, total, widths](detail::Node& self) {
                        std::size_t offset = 0;
                        for (std::size_t k = 0; k < widths.size(); ++k) {
                          if (auto* g = self.ParentGrad(k)) {
                            for (std::size_t i = 0; i < rows; ++i) {
                              for (std::size_t j = 0; j < widths[k]; ++j) {
                                (*g)[i * widths[k] + j] +=
                                    self.grad[i * total + offset + j];
                              }
                            }
                          }
                          offset += widths[k];
                        }
                      });
}

Tensor ConcatRows(std::span<const Tensor> parts) {
  if (parts.empty()) throw Error("concat_rows: no inputs");
  const std::size_t cols = parts[0].cols();
  std::vector<std::size_t> counts;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw Error(PairMessage("concat_rows", parts[0].shape(), p.shape()));
    }
    counts.push_back(p.numel());
    total += p.rows();
  }
  std::vector<double> out;
  out.reserve(total * cols);
  for (const auto& p : parts) {
    const auto pv = p.values();
    out.insert(out.end(), pv.begin(), pv.end());
  }
  return MakeOpResult({total, cols}, std::move(out),
                      std::vector<Tensor>(parts.begin(), parts.end()),
                      [counts](detail::Node& self) {
                        std::size_t offset = 0;
                        for (std::size_t k = 0; k < counts.size(); ++k) {
                          if (auto* g = self.ParentGrad(k)) {
                            for (std::size_t i = 0; i < counts[k]; ++i) {
                              (*g)[i] += self.grad[offset + i];
                            }
                          }
                          offset += counts[k];
                        }
                      });
}

Tensor SliceRows(const Tensor& x, std::size_t begin, std::size_t end) {
  const View2 v = RequireMatrix("slice_rows", x);
  if (begin > end || end > v.rows) {
    throw Error("slice_rows: range [" + std::to_string(begin) + ", " +
                std::to_string(end) + ") out of bounds for " +
                ShapeString(x.shape()));
  }
  const auto xv = x.values();
  std::vector<double> out(xv.begin() + begin * v.cols, xv.begin() + end * v.cols);
  return MakeOpResult({end - begin, v.cols}, std::move(out), {x},
                      [begin, v](detail::Node& self) {
                        auto* gx = self.ParentGrad(0);
                        if (!gx) return;
                        for (std::size_t i = 0; i < self.grad.size(); ++i) {
                          (*gx)[begin * v.cols + i] += self.grad[i];
                        }
                      });
}

Tensor SliceCols(const Tensor& x, std::size_t begin, std::size_t end) {
  const View2 v = AsView(x.shape());
  if (begin > end || end > v.cols) {
    throw Error("slice_cols: range [" + std::to_string(begin) + ", " +
                std::to_string(end) + ") out of bounds for " +
                ShapeString(x.shape()));
  }
  const std::size_t w = end - begin;
  const auto xv = x.values();
  std::vector<double> out(v.rows * w);
  for (std::size_t i = 0; i < v.rows; ++i) {
    std::copy_n(xv.begin() + i * v.cols + begin, w, out.begin() + i * w);
  }
  Shape shape = x.rank() <= 1 ? Shape{w} : Shape{v.rows, w};
  return MakeOpResult(std::move(shape), std::move(out), {x},
                      [begin, w, v](detail::Node& self) {
                        auto* gx = self.ParentGrad(0);
                        if (!gx) return;
                        for (std::size_t i = 0; i < v.rows; ++i) {
                          for (std::size_t j = 0; j < w; ++j) {
                            (*gx)[i * v.cols + begin + j] += self.grad[i * w + j];
                          }
                        }
                      });
}

Tensor EmbeddingLookup(const Tensor& table, std::span<const int> ids) {
  const View2 v = RequireMatrix("embedding", table);
  const auto tv = table.values();
  std::vector<double> out(ids.size() * v.cols);
  for (std::size_t n = 0; n < ids.size(); ++n) {
    if (ids[n] < 0 || static_cast<std::size_t>(ids[n]) >= v.rows) {
      throw Error("embedding: token id " + std::to_string(ids[n]) +
                  " outside vocabulary of size " + std::to_string(v.rows));
    }
    std::copy_n(tv.begin() + ids[n] * v.cols, v.cols, out.begin() + n * v.cols);
  }
  std::vector<int> idv(ids.begin(), ids.end());
  return MakeOpResult({ids.size(), v.cols}, std::move(out), {table},
                      [idv, v](detail::Node& self) {
                        auto* gt = self.ParentGrad(0);
                        if (!gt) return;
                        for (std::size_t n = 0; n < idv.size(); ++n) {
                          for (std::size_t j = 0; j < v.cols; ++j) {
                            (*gt)[idv[n] * v.cols + j] += self.grad[n * v.cols + j];
                          }
                        }
                      });
}

Tensor Im2Col(const Tensor& x, std::size_t kernel) {
  const View2 v = RequireMatrix("im2col", x);
  if (kernel % 2 == 0) throw Error("conv1d: kernel size must be odd");
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(kernel / 2);
  const std::size_t width = kernel * v.cols;
  const auto xv = x.values();
  std::vector<double> out(v.rows * width, 0.0);
  for (std::size_t t = 0; t < v.rows; ++t) {
    for (std::size_t k = 0; k < kernel; ++k) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) +
                                 static_cast<std::ptrdiff_t>(k) - half;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(v.rows)) continue;
      std::copy_n(xv.begin() + src * v.cols, v.cols,
                  out.begin() + t * width + k * v.cols);
    }
  }
  return MakeOpResult({v.rows, width}, std::move(out), {x},
                      [v, kernel, half, width](detail::Node& self) {
                        auto* gx = self.ParentGrad(0);
                        if (!gx) return;
                        for (std::size_t t = 0; t < v.rows; ++t) {
                          for (std::size_t k = 0; k < kernel; ++k) {
                            const std::ptrdiff_t src =
                                static_cast<std::ptrdiff_t>(t) +
                                static_cast<std::ptrdiff_t>(k) - half;
                            if (src < 0 ||
                                src >= static_cast<std::ptrdiff_t>(v.rows)) {
                              continue;
                            }
                            for (std::size_t c = 0; c < v.cols; ++c) {
                              (*gx)[src * v.cols + c] +=
                                  self.grad[t * width + k * v.cols + c];
                            }
                          }
                        }
                      });
}

Tensor Conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  const View2 vw = RequireMatrix("conv1d", weight);
  const std::size_t cin = x.cols();
  if (cin == 0 || vw.rows % cin != 0) {
    throw Error(PairMessage("conv1d", x.shape(), weight.shape()));
  }
  return Add(MatMul(Im2Col(x, vw.rows / cin), weight), bias);
}

// ---- composite / fused --------------------------------------------------------

Tensor Dropout(const Tensor& x, double rate, Rng rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) return Scale(x, 0.0);
  const double keep = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.numel());
  for (auto& m : mask) m = rng.Uniform() < rate ? 0.0 : keep;
  return Mul(x, Tensor::FromVector(x.shape(), std::move(mask)));
}

Tensor LayerNorm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                 double eps) {
  const Tensor centred = Sub(x, Mean(x, x.rank() - 1));
  const Tensor var = Mean(Square(centred), x.rank() - 1);
  return Add(Mul(Div(centred, Sqrt(AddScalar(var, eps))), gain), bias);
}

Tensor Softmax(const Tensor& x) {
  const View2 v = AsView(x.shape());
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < v.rows; ++i) {
    const double* row = xv.data() + i * v.cols;
    const double mx = *std::max_element(row, row + v.cols);
    double total = 0.0;
    for (std::size_t j = 0; j < v.cols; ++j) {
      out[i * v.cols + j] = std::exp(row[j] - mx);
      total += out[i * v.cols + j];
    }
    for (std::size_t j = 0; j < v.cols; ++j) out[i * v.cols + j] /= total;
  }
  return MakeOpResult(x.shape(), std::move(out), {x}, [v](detail::Node& self) {
    auto* gx = self.ParentGrad(0);
    if (!gx) return;
    for (std::size_t i = 0; i < v.rows; ++i) {
      const double* y = self.value.data() + i * v.cols;
      const double* g = self.grad.data() + i * v.cols;
      double dot = 0.0;
      for (std::size_t j = 0; j < v.cols; ++j) dot += g[j] * y[j];
      for (std::size_t j = 0; j < v.cols; ++j) {
        (*gx)[i * v.cols + j] += y[j] * (g[j] - dot);
      }
    }
  });
}

namespace {
void CheckVariance(const Tensor& variance) {
  for (double v : variance.values()) {
    if (!(v > 0.0)) {
      throw Error("gaussian_pdf: variance must be positive, got " +
                  std::to_string(v));
    }
  }
}
}  // namespace

Tensor GaussianLogPdf(const Tensor& t, const Tensor& mean,
                      const Tensor& variance) {
  CheckVariance(variance);
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const Tensor quad = Div(Square(Sub(t, mean)), Scale(variance, 2.0));
  return AddScalar(Neg(Add(quad, Scale(Log(variance), 0.5))), -half_log_2pi);
}

Tensor GaussianPdf(const Tensor& t, const Tensor& mean,
                   const Tensor& variance) {
  return Exp(GaussianLogPdf(t, mean, variance));
}

}  // namespace natts

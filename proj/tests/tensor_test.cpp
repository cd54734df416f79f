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

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "doctest.h"
#include "natts/grad_check.hpp"
#include "natts/rng.hpp"
#include "natts/tensor.hpp"

using namespace natts;

namespace {

// Values bounded away from zero so kinked ops (relu, abs) stay differentiable
// under the finite-difference step.
Tensor RandomTensor(Rng& rng, Shape shape, double lo = -2.0, double hi = 2.0,
                    double avoid = 0.05) {
  std::vector<double> v(NumElements(shape));
  for (auto& x : v) {
    do {
      x = lo + (hi - lo) * rng.Uniform();
    } while (std::abs(x) < avoid);
  }
  return Tensor::FromVector(std::move(shape), std::move(v));
}

Tensor Positive(Rng& rng, Shape shape) {
  return RandomTensor(rng, std::move(shape), 0.3, 2.0);
}

// Weighted sum so every output element carries a distinct cotangent.
Tensor Project(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(y.numel());
  for (auto& x : w) x = rng.Normal();
  return SumAll(Mul(y, Tensor::FromVector(y.shape(), std::move(w))));
}

struct OpCase {
  std::string name;
  std::function<std::vector<Tensor>(Rng&)> inputs;
  std::function<Tensor(std::span<const Tensor>)> op;
};

std::vector<OpCase> OpCases() {
  auto unary = [](std::string name, Tensor (*f)(const Tensor&), bool positive) {
    return OpCase{name,
                  [positive](Rng& r) {
                    return std::vector<Tensor>{positive ? Positive(r, {3, 4})
                                                        : RandomTensor(r, {3, 4})};
                  },
                  [f](std::span<const Tensor> p) { return f(p[0]); }};
  };
  std::vector<OpCase> cases = {
      unary("relu", Relu, false),       unary("tanh", Tanh, false),
      unary("sigmoid", Sigmoid, false), unary("softplus", Softplus, false),
      unary("exp", Exp, false),         unary("log", Log, true),
      unary("square", Square, false),   unary("sqrt", Sqrt, true),
      unary("abs", Abs, false),         unary("neg", Neg, false),
      unary("transpose", Transpose, false),
      unary("cumsum", CumSum, false),   unary("softmax", Softmax, false),
      unary("sum_all", SumAll, false),  unary("mean_all", MeanAll, false),
  };
  cases.push_back({"matmul",
                   [](Rng& r) {
                     return std::vector<Tensor>{RandomTensor(r, {3, 4}),
                                                RandomTensor(r, {4, 2})};
                   },
                   [](std::span<const Tensor> p) { return MatMul(p[0], p[1]); }});
  cases.push_back({"add_broadcast",
                   [](Rng& r) {
                     return std::vector<Tensor>{RandomTensor(r, {3, 4}),
                                                RandomTensor(r, {4})};
                   },
                   [](std::span<const Tensor> p) { return Add(p[0], p[1]); }});
  cases.push_back({"sub_column",
                   [](Rng& r) {
                     return std::vector<Tensor>{RandomTensor(r, {3, 4}),
                                                RandomTensor(r, {3, 1})};
                   },
                   [](std::span<const Tensor> p) { return Sub(p[0], p[1]); }});
  cases.push_back({"mul_outer",
                   [](Rng& r) {
                     return std::vector<Tensor>{RandomTensor(r, {3, 1}),
                                                RandomTensor(r, {4})};
                   },
                   [](std::span<const Tensor> p) { return Mul(p[0], p[1]); }});
  cases.push_back({"div",
                   [](Rng& r) {
                     return std::vector<Tensor>{RandomTensor(r, {3, 4}),
                                                Positive(r, {3, 4})};
                   },
                   [](std::span<const Tensor> p) { return Div(p[0], p[1]); }});
  cases.push_back({"minimum",
                   [](Rng& r) {
                     Tensor a = RandomTensor(r, {3, 4});
                     std::vector<double> b = a.ToVector();
                     for (auto& x : b) x += (r.Uniform() < 0.5 ? -0.5 : 0.5);
                     return std::vector<Tensor>{a, Tensor::FromVector({3, 4}, b)};
                   },
                   [](std::span<const Tensor> p) { return Minimum(p[0], p[1]); }});
  cases.push_back({"scale_shift",
                   [](Rng& r) { return std::vector<Tensor>{RandomTensor(r, {5})}; },
                   [](std::span<const Tensor> p) {
                     return AddScalar(Scale(p[0], -1.7), 0.3);
                   }});
  cases.push_back({"sum_mean_axes",
                   [](Rng& r) { return std::vector<Tensor>{RandomTensor(r, {3, 4})}; },
                   [](std::span<const Tensor> p) {
                     const Tensor parts[] = {Reshape(Sum(p[0], 0), {1, 4}),
                                             Reshape(Mean(p[0], 1), {1, 3})};
                     return ConcatCols(parts);
                   }});
  cases.push_back({"concat_slice",
                   [](Rng& r) {
                     return std::vector<Tensor>{RandomTensor(r, {3, 2}),
                                                RandomTensor(r, {3, 3})};
                   },
                   [](std::span<const Tensor> p) {
                     const Tensor cols[] = {p[0], p[1]};
                     const Tensor c = ConcatCols(cols);
                     return Mul(SliceRows(c, 1, 3), SliceRows(SliceCols(c, 0, 5), 0, 2));
                   }});
  cases.push_back({"concat_rows",
                   [](Rng& r) {
                     return std::vector<Tensor>{RandomTensor(r, {2, 3}),
                                                RandomTensor(r, {1, 3})};
                   },
                   [](std::span<const Tensor> p) {
                     const Tensor rows[] = {p[0], p[1], p[0]};
                     return SliceCols(ConcatRows(rows), 1, 3);
                   }});
  cases.push_back({"embedding",
                   [](Rng& r) { return std::vector<Tensor>{RandomTensor(r, {5, 3})}; },
                   [](std::span<const Tensor> p) {
                     const int ids[] = {4, 0, 4, 2};
                     return EmbeddingLookup(p[0], ids);
                   }});
  cases.push_back({"conv1d",
                   [](Rng& r) {
                     return std::vector<Tensor>{RandomTensor(r, {6, 2}),
                                                RandomTensor(r, {3 * 2, 4}),
                                                RandomTensor(r, {4})};
                   },
                   [](std::span<const Tensor> p) { return Conv1d(p[0], p[1], p[2]); }});
  cases.push_back({"layer_norm",
                   [](Rng& r) {
                     return std::vector<Tensor>{RandomTensor(r, {3, 5}),
                                                RandomTensor(r, {5}),
                                                RandomTensor(r, {5})};
                   },
                   [](std::span<const Tensor> p) { return LayerNorm(p[0], p[1], p[2]); }});
  cases.push_back({"gaussian_pdf",
                   [](Rng& r) {
                     return std::vector<Tensor>{RandomTensor(r, {4, 1}),
                                                RandomTensor(r, {3}),
                                                Positive(r, {3})};
                   },
                   [](std::span<const Tensor> p) {
                     return GaussianPdf(p[0], p[1], p[2]);
                   }});
  cases.push_back({"gaussian_log_pdf",
                   [](Rng& r) {
                     return std::vector<Tensor>{RandomTensor(r, {4, 1}),
                                                RandomTensor(r, {3}),
                                                Positive(r, {3})};
                   },
                   [](std::span<const Tensor> p) {
                     return GaussianLogPdf(p[0], p[1], p[2]);
                   }});
  cases.push_back({"dropout_fixed_mask",
                   [](Rng& r) { return std::vector<Tensor>{RandomTensor(r, {4, 4})}; },
                   [](std::span<const Tensor> p) { return Dropout(p[0], 0.3, Rng(5)); }});
  return cases;
}

}  // namespace

TEST_CASE("closed-form op values") {
  CHECK(Softplus(Tensor::Scalar(0.0)).item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const Tensor pdf = GaussianPdf(Tensor::Scalar(1.5), Tensor::Scalar(1.5),
                                 Tensor::Scalar(1.0));
  CHECK(pdf.item() == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-15));

  Rng rng(3);
  const Tensor a = RandomTensor(rng, {3, 3});
  const Tensor eye = Tensor::Matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Tensor prod = MatMul(eye, a);
  for (std::size_t i = 0; i < 9; ++i) CHECK(prod.at(i) == a.at(i));
}

TEST_CASE("closed-form gradients") {
  const Tensor x = Tensor::Scalar(3.0, true);
  Backward(Square(x));
  CHECK(x.grad()[0] == 6.0);

  const Tensor z = Tensor::Zeros({4}, true);
  Backward(SumAll(Softplus(z)));
  for (double g : z.grad()) CHECK(g == 0.5);
}

TEST_CASE("backward rejects non-scalar loss") {
  const Tensor x = Tensor::Zeros({2}, true);
  CHECK_THROWS_AS(Backward(Exp(x)), Error);
}

TEST_CASE("shape mismatch names both shapes") {
  const Tensor a = Tensor::Zeros({2, 3});
  const Tensor b = Tensor::Zeros({4, 5});
  try {
    MatMul(a, b);
    FAIL("expected throw");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2, 3]") != std::string::npos);
    CHECK(msg.find("[4, 5]") != std::string::npos);
  }
  CHECK_THROWS_AS(Add(a, b), Error);
}

TEST_CASE("non-positive variance is rejected") {
  CHECK_THROWS_AS(GaussianPdf(Tensor::Scalar(0), Tensor::Scalar(0), Tensor::Scalar(0)),
                  Error);
  CHECK_THROWS_AS(GaussianLogPdf(Tensor::Scalar(0), Tensor::Scalar(0),
                                 Tensor::Scalar(-1)),
                  Error);
}

TEST_CASE("every op matches finite differences on random inputs") {
  GradCheckOptions opt;
  opt.tolerance = 1e-5;
  for (const auto& c : OpCases()) {
    for (int trial = 0; trial < 100; ++trial) {
      Rng rng = Rng(17).Split(trial);
      const std::vector<Tensor> inputs = c.inputs(rng);
      const auto op = c.op;
      const std::uint64_t proj = 1000 + trial;
      const GradCheckReport r = GradCheck(
          [&](std::span<const Tensor> p) { return Project(op(p), proj); }, inputs, opt);
      INFO(c.name << " trial " << trial << " max rel err " << r.max_rel_error);
      REQUIRE(r.passed);
    }
  }
}

TEST_CASE("gradient accumulation does not depend on traversal order") {
  Rng rng(8);
  const Tensor w = RandomTensor(rng, {4, 4});
  const Tensor x = RandomTensor(rng, {3, 4});
  auto run = [&](bool reverse) {
    const Tensor wl = Tensor::FromVector(w.shape(), w.ToVector(), true);
    const Tensor xl = Tensor::FromVector(x.shape(), x.ToVector(), true);
    Tensor h = xl;
    // Shared subexpressions give nodes several consumers.
    for (int k = 0; k < 3; ++k) h = Add(Tanh(MatMul(h, wl)), Scale(h, 0.5));
    const Tensor loss = Add(SumAll(Square(h)), SumAll(Mul(h, xl)));
    Backward(loss, reverse);
    std::vector<double> g(wl.grad().begin(), wl.grad().end());
    g.insert(g.end(), xl.grad().begin(), xl.grad().end());
    return g;
  };
  const auto a = run(false);
  const auto b = run(true);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);
}

TEST_CASE("dropout") {
  Rng rng(2);
  const Tensor x = RandomTensor(rng, {5, 6});
  const Tensor same = Dropout(x, 0.0, Rng(1));
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(same.at(i) == x.at(i));
  const Tensor a = Dropout(x, 0.4, Rng(9));
  const Tensor b = Dropout(x, 0.4, Rng(9));
  const Tensor c = Dropout(x, 0.4, Rng(10));
  bool differs = false;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    CHECK(a.at(i) == b.at(i));
    CHECK((a.at(i) == 0.0 || a.at(i) == doctest::Approx(x.at(i) / 0.6)));
    differs |= a.at(i) != c.at(i);
  }
  CHECK(differs);
}

TEST_CASE("grad check flags a wrong backward rule") {
  // Cube with the derivative of a square.
  auto bad_cube = [](const Tensor& x) {
    std::vector<double> v = x.ToVector();
    for (auto& e : v) e = e * e * e;
    return MakeOpResult(x.shape(), std::move(v), {x}, [](detail::Node& n) {
      auto* g = n.ParentGrad(0);
      if (!g) return;
      const auto& in = n.parents[0]->value;
      for (std::size_t i = 0; i < in.size(); ++i) (*g)[i] += 2.0 * in[i] * n.grad[i];
    });
  };
  Rng rng(4);
  const Tensor x = RandomTensor(rng, {4});
  const auto r = GradCheck([&](std::span<const Tensor> p) { return SumAll(bad_cube(p[0])); },
                           std::vector<Tensor>{x});
  CHECK_FALSE(r.passed);
}

TEST_CASE("grad check reports non-finite values") {
  const Tensor x = Tensor::FromVector({2}, {1.0, -1.0});
  const auto r = GradCheck([](std::span<const Tensor> p) { return SumAll(Log(p[0])); },
                           std::vector<Tensor>{x});
  CHECK_FALSE(r.passed);
}

TEST_CASE("no-grad guard stops graph recording") {
  const Tensor x = Tensor::Scalar(2.0, true);
  {
    NoGradGuard guard;
    CHECK_FALSE(Square(x).requires_grad());
  }
  CHECK(Square(x).requires_grad());
}

TEST_CASE("philox known answer and stream determinism") {
  const auto block = Rng::Philox(0, 0);
  CHECK(block[0] == 0x6627e8d5u);
  CHECK(block[1] == 0xe169c58du);
  CHECK(block[2] == 0xbc57ac4cu);
  CHECK(block[3] == 0x9b00dbd8u);

  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.NextU64() == b.NextU64());
  Rng parent(42);
  const auto before = parent.counter();
  Rng child = parent.Split(3);
  CHECK(parent.counter() == before);
  CHECK(child.key() != parent.key());
  CHECK(Rng(42).Split(3).NextU64() == child.NextU64());
}

TEST_CASE("normal draws have unit moments") {
  Rng rng(11);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.Normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

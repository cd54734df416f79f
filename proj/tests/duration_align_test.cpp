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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "natts/duration_align.hpp"
#include "natts/grad_check.hpp"

using namespace natts;

namespace {

std::vector<int> RandomFrames(Rng& rng, std::size_t n, int max_frames,
                              bool allow_zero) {
  std::vector<int> f(n);
  for (auto& x : f) {
    x = static_cast<int>(rng.Below(max_frames + (allow_zero ? 1 : 0))) +
        (allow_zero ? 0 : 1);
  }
  return f;
}

Tensor ToTensor(const std::vector<int>& frames) {
  return Tensor::FromVector({frames.size()},
                            std::vector<double>(frames.begin(), frames.end()));
}

Tensor RandomMatrix(Rng& rng, std::size_t r, std::size_t c) {
  std::vector<double> v(r * c);
  for (auto& x : v) x = rng.Normal();
  return Tensor::Matrix(r, c, std::move(v));
}

}  // namespace

TEST_CASE("seconds to frames") {
  CHECK(SecondsToFrames(std::vector<double>{0.05, 0.05}, 0.0125) == std::vector<int>{4, 4});
  CHECK(SecondsToFrames(std::vector<double>{0.01875, 0.01875}, 0.0125) ==
        std::vector<int>{2, 1});
  CHECK_THROWS_WITH_AS(SecondsToFrames(std::vector<double>{0.001}, 0.0125),
                       doctest::Contains("empty output"), Error);
  CHECK_THROWS_AS(SecondsToFrames(std::vector<double>{0.1, -0.1}, 0.0125), Error);
  CHECK(SecondsToFrames(std::vector<double>{0.05, 0.05}, 0.0125, 10) ==
        std::vector<int>{4, 6});
}

TEST_CASE("seconds to frames total matches direct rounding") {
  for (int trial = 0; trial < 500; ++trial) {
    Rng rng = Rng(21).Split(trial);
    const double hop = 0.005 + 0.02 * rng.Uniform();
    std::vector<double> d(1 + rng.Below(20));
    for (auto& x : d) x = 0.3 * rng.Uniform();
    const double total = std::accumulate(d.begin(), d.end(), 0.0);
    const long long expect = std::llround(total / hop);
    if (expect == 0) continue;
    const auto f = SecondsToFrames(d, hop);
    CHECK(std::accumulate(f.begin(), f.end(), 0LL) == expect);
    for (int x : f) CHECK(x >= 0);
  }
}

TEST_CASE("gaussian centres") {
  const Tensor c = GaussianCenters(Tensor::FromVector({3}, {2, 1, 3}));
  CHECK(c.at(0) == 1.0);
  CHECK(c.at(1) == 2.5);
  CHECK(c.at(2) == 4.5);
}

TEST_CASE("centres are exact for random duration vectors") {
  for (int trial = 0; trial < 1000; ++trial) {
    Rng rng = Rng(31).Split(trial);
    const auto f = RandomFrames(rng, 1 + rng.Below(30), 40, true);
    const Tensor c = GaussianCenters(ToTensor(f));
    long long before = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      // Integers and halves are exact in binary floating point.
      CHECK(c.at(i) == static_cast<double>(before) + 0.5 * f[i]);
      before += f[i];
    }
  }
}

TEST_CASE("upsampling weights are row-stochastic with monotone centres") {
  for (int trial = 0; trial < 200; ++trial) {
    Rng rng = Rng(41).Split(trial);
    const std::size_t n = 1 + rng.Below(12);
    auto f = RandomFrames(rng, n, 8, false);
    std::vector<double> sigma(n);
    for (auto& s : sigma) s = 0.05 + 5.0 * rng.Uniform();
    const Tensor h = RandomMatrix(rng, n, 3);
    const auto r = GaussianUpsample(h, ToTensor(f), Tensor::FromVector({n}, sigma));
    const int T = std::accumulate(f.begin(), f.end(), 0);
    REQUIRE(r.weights.rows() == static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) s += r.weights.at(t, i);
      CHECK(std::abs(s - 1.0) <= 1e-9);
    }
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(r.centers.at(i) >= 0.0);
      CHECK(r.centers.at(i) <= T);
      if (i) CHECK(r.centers.at(i) > r.centers.at(i - 1));
    }
  }
}

TEST_CASE("single token repeats its row") {
  const Tensor h = Tensor::Matrix(1, 2, {0.3, -1.2});
  const auto r = GaussianUpsample(h, Tensor::FromVector({1}, {5}),
                                  Tensor::FromVector({1}, {0.7}));
  for (std::size_t t = 0; t < 5; ++t) {
    CHECK(r.weights.at(t, 0) == 1.0);
    CHECK(r.upsampled.at(t, 0) == doctest::Approx(0.3).epsilon(1e-15));
  }
}

TEST_CASE("narrow ranges reproduce repeat assignment") {
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng = Rng(51).Split(trial);
    const std::size_t n = 1 + rng.Below(10);
    const auto f = RandomFrames(rng, n, 8, false);
    std::vector<double> sigma(n);
    for (std::size_t i = 0; i < n; ++i) sigma[i] = 1e-3 * f[i];
    const auto r = GaussianUpsample(RandomMatrix(rng, n, 2), ToTensor(f),
                                    Tensor::FromVector({n}, sigma));
    const auto owner = RepeatAssignment(f);
    for (std::size_t t = 0; t < owner.size(); ++t) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (r.weights.at(t, i) > r.weights.at(t, best)) best = i;
      }
      CHECK(static_cast<int>(best) == owner[t]);
    }
  }
}

TEST_CASE("a uniform narrow range can pick the neighbouring token") {
  // Frame 5 (centre 5.5) is 2.5 from the first centre and 1.0 from the second.
  const auto r = GaussianUpsample(Tensor::Matrix(2, 1, {0, 1}),
                                  Tensor::FromVector({2}, {6, 1}),
                                  Tensor::FromVector({2}, {1e-3, 1e-3}));
  CHECK(r.weights.at(5, 1) > r.weights.at(5, 0));
  CHECK(RepeatAssignment(std::vector<int>{6, 1})[5] == 0);
}

TEST_CASE("weights are invariant to a common time scale") {
  Rng rng(61);
  const std::vector<double> seconds = {0.05, 0.1125, 0.0375, 0.075};
  const double hop = 0.0125;
  const std::vector<double> sigma = {1.5, 2.0, 0.7, 3.0};
  auto weights = [&](double scale) {
    std::vector<double> d(seconds.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = seconds[i] * scale / (hop * scale);
    return GaussianUpsample(RandomMatrix(rng, 4, 2), Tensor::FromVector({4}, d),
                            Tensor::FromVector({4}, sigma))
        .weights.ToVector();
  };
  const auto a = weights(1.0);
  const auto b = weights(2.5);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("upsampling gradients w.r.t. encoder rows, ranges and durations") {
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng = Rng(71).Split(trial);
    const std::size_t n = 2 + rng.Below(5);
    std::vector<double> d(n), s(n);
    for (auto& x : d) x = 1.0 + 4.0 * rng.Uniform();
    for (auto& x : s) x = 0.5 + 2.0 * rng.Uniform();
    const std::size_t T = static_cast<std::size_t>(
        std::llround(std::accumulate(d.begin(), d.end(), 0.0)));
    const Tensor target = RandomMatrix(rng, T, 3);
    const std::vector<Tensor> params = {RandomMatrix(rng, n, 3),
                                        Tensor::FromVector({n}, s),
                                        Tensor::FromVector({n}, d)};
    GradCheckOptions opt;
    opt.tolerance = 1e-4;
    const auto r = GradCheck(
        [&](std::span<const Tensor> p) {
          const auto up = GaussianUpsample(p[0], p[2], p[1], T);
          return MeanAll(Square(Sub(up.upsampled, target)));
        },
        params, opt);
    INFO("trial " << trial << " err " << r.max_rel_error);
    CHECK(r.passed);
  }
}

TEST_CASE("repeat upsampling") {
  const Tensor h = Tensor::Matrix(3, 1, {10, 20, 30});
  const Tensor u = RepeatUpsample(h, std::vector<int>{2, 1, 3});
  CHECK(u.ToVector() == std::vector<double>{10, 10, 20, 30, 30, 30});
  CHECK(RepeatUpsample(h, std::vector<int>{1, 1, 1}).ToVector() == h.ToVector());
  CHECK(RepeatUpsample(h, std::vector<int>{0, 2, 1}).rows() == 3);
}

TEST_CASE("positional indices reset at each token") {
  CHECK(WithinTokenIndices(std::vector<int>{2, 1, 3}) ==
        std::vector<int>{1, 2, 1, 1, 2, 3});
  CHECK(WithinTokenIndices(std::vector<int>{1}) == std::vector<int>{1});
  const Tensor pe = PositionalEmbedding(std::vector<int>{3, 3}, 8);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t k = 0; k < 8; ++k) CHECK(pe.at(t, k) == pe.at(t + 3, k));
  }
  CHECK(pe.at(0, 0) == doctest::Approx(std::sin(1.0)));
  CHECK(pe.at(0, 1) == doctest::Approx(std::cos(1.0)));
  CHECK(pe.at(1, 2) == doctest::Approx(std::sin(2.0 / std::pow(10000.0, 2.0 / 8))));
  CHECK_THROWS_AS(PositionalEmbedding(std::vector<int>{1}, 3), Error);
}

TEST_CASE("pace control") {
  const std::vector<double> d = {0.1, 0.2, 0.05};
  CHECK(PaceControl(d, 1.0) == d);
  const auto fast = PaceControl(d, 1.25);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(fast[i] == doctest::Approx(d[i] / 1.25));
  const auto slow = PaceControl(d, 1.0, std::vector<double>{1.0, 1.5, 1.0});
  CHECK(slow[1] == doctest::Approx(0.3));
  CHECK(slow[0] == d[0]);
  CHECK_THROWS_AS(PaceControl(d, 1.0, std::vector<double>{1.0}), Error);
  CHECK_THROWS_AS(PaceControl(d, 0.0), Error);
  CHECK(PaceControl(d, 1.0, std::vector<double>{1, 1, 1}) == PaceControl(d, 1.0));
}

TEST_CASE("predictors") {
  ParamStore ps;
  Rng rng(5);
  DurationPredictor dp(ps, "dur", {8, 4, 6, 0.1}, rng);
  RangePredictor rp(ps, "range", {8, 6, true, 10.0, 2.0}, rng);
  RangePredictor fixed(ps, "fixed", {8, 6, false, 10.0, 2.0}, rng);
  const Tensor h = RandomMatrix(rng, 5, 8);
  const Tensor z = Tensor::Zeros({5, 4});
  const Tensor d = dp(ps, h, &z, 0.0, false, Rng(1));
  CHECK(d.numel() == 5);
  CHECK_THROWS_AS(dp(ps, h, nullptr, 0.0, false, Rng(1)), Error);

  Tensor frames = Tensor::FromVector({5}, {4, 0.1, 3, 4, 1});
  const Tensor s = rp(ps, Scale(h, 30.0), frames, false, 0.0, false, Rng(1));
  for (double v : s.values()) CHECK(v > 0.0);
  const Tensor capped = rp(ps, Scale(h, 30.0), Tensor::Full({5}, 4.0), true, 0.0, false, Rng(1));
  for (double v : capped.values()) CHECK(v <= 8.0);
  const Tensor constant = fixed(ps, h, frames, false, 0.0, false, Rng(1));
  for (double v : constant.values()) CHECK(v == 10.0);
}

TEST_CASE("zero latents match a predictor that ignores them") {
  ParamStore with, without;
  Rng r1(9), r2(9);
  DurationPredictor a(with, "dur", {4, 3, 5, 0.1}, r1);
  DurationPredictor b(without, "dur", {4, 0, 5, 0.1}, r2);
  // Copy the shared weights; zero the latent rows of the input matrices.
  for (std::size_t i = 0; i < without.size(); ++i) {
    const auto& e = without.entry(i);
    const std::size_t j = with.Find(e.name);
    if (with[j].shape() == e.value.shape()) {
      with.Set(j, e.value);
    } else {
      std::vector<double> v(with[j].numel(), 0.0);
      const auto src = e.value.values();
      std::copy(src.begin(), src.end(), v.begin());
      with.Set(j, std::move(v));
    }
  }
  Rng rng(3);
  const Tensor h = RandomMatrix(rng, 6, 4);
  const Tensor z = Tensor::Zeros({6, 3});
  const Tensor da = a(with, h, &z, 0.0, false, Rng(0));
  const Tensor db = b(without, h, nullptr, 0.0, false, Rng(0));
  for (std::size_t i = 0; i < 6; ++i) CHECK(da.at(i) == doctest::Approx(db.at(i)).epsilon(1e-14));
}

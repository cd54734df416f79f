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

#include "natts/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace natts {

double RelativeError(double analytic, double numeric, double abs_floor) {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), abs_floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport GradCheck(const GraphBuilder& f, std::span<const Tensor> params,
                          const GradCheckOptions& options,
                          std::span<const std::string> names) {
  // Analytic pass on fresh leaves.
  std::vector<Tensor> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) {
    leaves.push_back(Tensor::FromVector(p.shape(), p.ToVector(), true));
  }
  const Tensor loss = f(leaves);
  Backward(loss);

  GradCheckReport report;
  if (!std::isfinite(loss.item())) report.passed = false;

  Rng rng(options.seed);
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    ParamCheck check;
    check.name = k < names.size() ? names[k] : "param" + std::to_string(k);
    const std::size_t n = leaves[k].numel();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_coords_per_param > 0 && n > options.max_coords_per_param) {
      Rng pick = rng.Split(k);
      for (std::size_t i = 0; i < options.max_coords_per_param; ++i) {
        std::swap(coords[i], coords[i + pick.Below(n - i)]);
      }
      coords.resize(options.max_coords_per_param);
    }
    const auto analytic = leaves[k].grad();
    for (std::size_t c : coords) {
      const double a = analytic.empty() ? 0.0 : analytic[c];
      auto eval = [&](double delta) {
        std::vector<Tensor> shifted(leaves.begin(), leaves.end());
        std::vector<double> v = leaves[k].ToVector();
        v[c] += delta;
        shifted[k] = Tensor::FromVector(leaves[k].shape(), std::move(v));
        return f(shifted).item();
      };
      const double numeric =
          (eval(options.step) - eval(-options.step)) / (2.0 * options.step);
      ++check.coords_checked;
      if (!std::isfinite(a) || !std::isfinite(numeric)) {
        ++check.non_finite;
        check.passed = false;
        continue;
      }
      const double err = RelativeError(a, numeric, options.abs_floor);
      check.max_rel_error = std::max(check.max_rel_error, err);
      if (err > options.tolerance) check.passed = false;
    }
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.passed = report.passed && check.passed;
    report.params.push_back(std::move(check));
  }
  return report;
}

}  // namespace natts

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

#ifndef NATTS_GRAD_CHECK_HPP_
#define NATTS_GRAD_CHECK_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "natts/tensor.hpp"

namespace natts {

/// Builds a scalar from the given parameter values. Must be deterministic.
using GraphBuilder = std::function<Tensor(std::span<const Tensor>)>;

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-5;
  /// Relative error is |a - n| / max(|a|, |n|, abs_floor).
  double abs_floor = 1e-6;
  /// 0 checks every coordinate; otherwise a seeded sample per parameter.
  std::size_t max_coords_per_param = 0;
  std::uint64_t seed = 0;
};

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::size_t non_finite = 0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  bool passed = true;
  double max_rel_error = 0.0;
};

/// Compares reverse-mode gradients of `f` against central differences.
/// `names` may be empty.
GradCheckReport GradCheck(const GraphBuilder& f, std::span<const Tensor> params,
                          const GradCheckOptions& options = {},
                          std::span<const std::string> names = {});

double RelativeError(double analytic, double numeric, double abs_floor);

}  // namespace natts

#endif  // NATTS_GRAD_CHECK_HPP_

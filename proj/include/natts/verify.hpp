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


// End-to-end self checks: gradient, invariant and oracle suites runnable from
// the command line, plus the small configuration they share with the tests.

#ifndef NATTS_VERIFY_HPP_
#define NATTS_VERIFY_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "natts/config.hpp"
#include "natts/training.hpp"

namespace natts {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SuiteResult {
  std::string name;
  std::vector<CheckResult> checks;
  double seconds = 0.0;

  bool passed() const;
};

/// gradients, upsampling, positional, losses, metrics, corpus, decoder.
const std::vector<std::string>& SuiteNames();

SuiteResult RunSuite(const std::string& name, std::uint64_t seed);

/// Small model and corpus used by the gradient and property checks.
RunConfig TinyConfig(Regime regime, std::uint64_t seed = 1);

/// Vocabulary, corpus and label split for a configuration, seeded the same
/// way as the command-line tools.
Dataset BuildDataset(const RunConfig& config);

struct GradientSweep {
  std::size_t instances = 0;
  std::size_t coords = 0;
  double max_rel_error = 0.0;
  std::string worst;  // "regime/parameter" of the largest error
  double seconds = 0.0;
};

/// Finite-difference check of the full training loss against every
/// trainable parameter, cycling through the four regimes.
GradientSweep MeasureModelGradients(std::size_t instances, std::uint64_t seed,
                                    std::size_t coords_per_param = 4);

}  // namespace natts

#endif  // NATTS_VERIFY_HPP_

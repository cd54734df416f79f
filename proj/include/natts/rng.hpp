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

#ifndef NATTS_RNG_HPP_
#define NATTS_RNG_HPP_

#include <array>
#include <cstdint>

namespace natts {

/// Counter-based generator (Philox4x32-10). A stream is identified by a
/// 64-bit key; draws are a pure function of (key, counter), so results do not
/// depend on platform or on the order in which independent streams are used.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : key_(Mix(seed)) {}

  /// Child stream for a named purpose (utterance index, layer, frame...).
  /// Splitting does not advance the parent.
  Rng Split(std::uint64_t tag) const {
    Rng child;
    child.key_ = Mix(key_ ^ Mix(tag + 0x9e3779b97f4a7c15ULL));
    return child;
  }

  std::uint64_t NextU64();
  /// Uniform in [0, 1) with 53 random bits.
  double Uniform();
  /// Standard normal via Box-Muller (one draw per call, no cached state).
  double Normal();
  double Normal(double mean, double stddev) { return mean + stddev * Normal(); }
  /// Uniform integer in [0, n).
  std::uint64_t Below(std::uint64_t n);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  static std::array<std::uint32_t, 4> Philox(std::uint64_t counter,
                                             std::uint64_t key);

 private:
  static std::uint64_t Mix(std::uint64_t x);

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

/// Independent seed for one purpose (vocabulary, corpus, model init...) of a
/// master seed.
inline std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t purpose) {
  return Rng(seed).Split(purpose).NextU64();
}

}  // namespace natts

#endif  // NATTS_RNG_HPP_

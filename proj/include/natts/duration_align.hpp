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

// Duration and range prediction, seconds-to-frames conversion, Gaussian and
// repeat upsampling, within-token positional embeddings and pace control.

#ifndef NATTS_DURATION_ALIGN_HPP_
#define NATTS_DURATION_ALIGN_HPP_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "natts/nn.hpp"
#include "natts/tensor.hpp"

namespace natts {

/// Cumulative rounding: frames_i = round(S_i / hop) - round(S_{i-1} / hop)
/// with S_i the running sum of durations. When `target_frames` is given the
/// last token absorbs the residual so the total matches exactly. Throws on an
/// empty result or a negative duration.
std::vector<int> SecondsToFrames(std::span<const double> seconds, double hop,
                                 std::optional<int> target_frames = {});

/// Gaussian centres in frame units: c_i = d_i / 2 + sum_{j<i} d_j.
Tensor GaussianCenters(const Tensor& durations);

struct UpsampleResult {
  Tensor upsampled;  // [T, E]
  Tensor weights;    // [T, N], rows sum to one
  Tensor centers;    // [N]
};

/// Weights w_ti proportional to N(t; c_i, sigma_i^2) evaluated at the frame
/// centres t = 0.5, 1.5, ..., T - 0.5 and normalised over tokens; the output
/// rows are u_t = sum_i w_ti h_i. `durations` and `ranges` are in frame units
/// and may be fractional; T is the rounded total unless given.
UpsampleResult GaussianUpsample(const Tensor& encoded, const Tensor& durations,
                                const Tensor& ranges,
                                std::optional<std::size_t> num_frames = {});

/// Hard expansion: row i repeated frames_i times.
Tensor RepeatUpsample(const Tensor& encoded, std::span<const int> frames);

/// 1-based index of every frame within its token, e.g. [2,1,3] ->
/// [1,2,1,1,2,3].
std::vector<int> WithinTokenIndices(std::span<const int> frames);

/// Sinusoidal embedding of the within-token indices, [T, dim] (dim even):
/// column 2k = sin(p / base^(2k/dim)), column 2k+1 = cos(same).
Tensor PositionalEmbedding(std::span<const int> frames, std::size_t dim,
                           double base = 10000.0);

/// d'_i = d_i * token_factor_i / global_factor.
std::vector<double> PaceControl(std::span<const double> seconds,
                                double global_factor,
                                std::span<const double> token_factors = {});

/// Token index each frame belongs to under repeat upsampling.
std::vector<int> RepeatAssignment(std::span<const int> frames);

struct DurationPredictorConfig {
  std::size_t input_dim = 0;   // encoder width
  std::size_t latent_dim = 0;  // 0 when no latents are used
  std::size_t rnn_dim = 16;
  double initial_seconds = 0.1;  // projection bias at initialisation
};

/// Bidirectional recurrent layer followed by a linear projection to one
/// duration (seconds) per token.
class DurationPredictor {
 public:
  DurationPredictor() = default;
  DurationPredictor(ParamStore& ps, const std::string& name,
                    const DurationPredictorConfig& config, Rng& rng);

  /// [N] durations in seconds. `latents` ([N, latent_dim]) is required iff
  /// the predictor was built with latent_dim > 0.
  Tensor operator()(const ParamStore& ps, const Tensor& encoded,
                    const Tensor* latents, double zoneout, bool training,
                    Rng rng) const;

  std::size_t latent_dim() const { return latent_dim_; }
  const Linear& projection() const { return projection_; }

 private:
  std::size_t latent_dim_ = 0;
  BiGru rnn_;
  Linear projection_;
};

struct RangePredictorConfig {
  std::size_t input_dim = 0;
  std::size_t rnn_dim = 16;
  bool learned = true;
  double fixed_value = 10.0;
  double initial_frames = 2.0;
};

/// Range parameters sigma (frame units) from the encoder output concatenated
/// with durations. The projection ends in SoftPlus so every output is
/// positive; with `learned = false` the configured constant is returned.
class RangePredictor {
 public:
  RangePredictor() = default;
  RangePredictor(ParamStore& ps, const std::string& name,
                 const RangePredictorConfig& config, Rng& rng);

  /// `duration_frames` is [N]. When `cap_to_twice_duration` is set each
  /// sigma_i is limited to 2 * duration_frames_i (floor 0.5 frame).
  Tensor operator()(const ParamStore& ps, const Tensor& encoded,
                    const Tensor& duration_frames, bool cap_to_twice_duration,
                    double zoneout, bool training, Rng rng) const;

 private:
  RangePredictorConfig config_;
  BiGru rnn_;
  Linear projection_;
};

}  // namespace natts

#endif  // NATTS_DURATION_ALIGN_HPP_

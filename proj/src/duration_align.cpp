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

#include "natts/duration_align.hpp"

#include <algorithm>
#include <cmath>

namespace natts {

namespace {

// Round half up. The small bias keeps exact halves (which rarely survive the
// division by hop exactly) from flipping downwards.
long long RoundFrames(double x) {
  return static_cast<long long>(std::floor(x + 0.5 + 1e-9));
}

}  // namespace

std::vector<int> SecondsToFrames(std::span<const double> seconds, double hop,
                                 std::optional<int> target_frames) {
  if (!(hop > 0.0)) throw Error("seconds_to_frames: hop must be positive");
  std::vector<int> frames(seconds.size());
  double running = 0.0;
  long long previous = 0;
  long long total = 0;
  for (std::size_t i = 0; i < seconds.size(); ++i) {
    if (!(seconds[i] >= 0.0)) {
      throw Error("seconds_to_frames: negative or non-finite duration " +
                  std::to_string(seconds[i]) + " at token " +
                  std::to_string(i));
    }
    running += seconds[i];
    const long long edge = RoundFrames(running / hop);
    frames[i] = static_cast<int>(edge - previous);
    previous = edge;
    total = edge;
  }
  if (target_frames && !frames.empty()) {
    const long long residual = *target_frames - total;
    frames.back() += static_cast<int>(residual);
    if (frames.back() < 0) {
      throw Error("seconds_to_frames: durations exceed target length " +
                  std::to_string(*target_frames));
    }
    total = *target_frames;
  }
  if (total <= 0) throw Error("seconds_to_frames: empty output");
  return frames;
}

Tensor GaussianCenters(const Tensor& durations) {
  return Sub(CumSum(durations), Scale(durations, 0.5));
}

UpsampleResult GaussianUpsample(const Tensor& encoded, const Tensor& durations,
                                const Tensor& ranges,
                                std::optional<std::size_t> num_frames) {
  const std::size_t n = encoded.rows();
  if (durations.numel() != n || ranges.numel() != n) {
    throw Error("gaussian_upsample: " + std::to_string(n) +
                " tokens but durations " + ShapeString(durations.shape()) +
                " and ranges " + ShapeString(ranges.shape()));
  }
  std::size_t T = 0;
  if (num_frames) {
    T = *num_frames;
  } else {
    double total = 0.0;
    for (double d : durations.values()) total += d;
    T = static_cast<std::size_t>(std::max(0LL, RoundFrames(total)));
  }
  if (T == 0) throw Error("gaussian_upsample: empty output");

  const Tensor d = Reshape(durations, {n});
  const Tensor sigma = Reshape(ranges, {n});
  std::vector<double> grid(T);
  for (std::size_t t = 0; t < T; ++t) grid[t] = static_cast<double>(t) + 0.5;
  const Tensor t_col = Tensor::FromVector({T, 1}, std::move(grid));

  UpsampleResult out;
  out.centers = GaussianCenters(d);
  out.weights =
      Softmax(GaussianLogPdf(t_col, out.centers, Square(sigma)));  // [T, N]
  out.upsampled = MatMul(out.weights, encoded);
  return out;
}

Tensor RepeatUpsample(const Tensor& encoded, std::span<const int> frames) {
  if (frames.size() != encoded.rows()) {
    throw Error("repeat_upsample: " + std::to_string(encoded.rows()) +
                " rows but " + std::to_string(frames.size()) + " durations");
  }
  std::vector<Tensor> rows;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i] <= 0) continue;
    const Tensor row = SliceRows(encoded, i, i + 1);
    for (int k = 0; k < frames[i]; ++k) rows.push_back(row);
  }
  if (rows.empty()) throw Error("repeat_upsample: empty output");
  return ConcatRows(rows);
}

std::vector<int> WithinTokenIndices(std::span<const int> frames) {
  std::vector<int> idx;
  for (int f : frames) {
    for (int k = 1; k <= f; ++k) idx.push_back(k);
  }
  return idx;
}

std::vector<int> RepeatAssignment(std::span<const int> frames) {
  std::vector<int> owner;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    for (int k = 0; k < frames[i]; ++k) owner.push_back(static_cast<int>(i));
  }
  return owner;
}

Tensor PositionalEmbedding(std::span<const int> frames, std::size_t dim,
                           double base) {
  if (dim % 2 != 0) throw Error("positional embedding dim must be even");
  const std::vector<int> idx = WithinTokenIndices(frames);
  std::vector<double> out(idx.size() * dim);
  for (std::size_t t = 0; t < idx.size(); ++t) {
    for (std::size_t k = 0; k < dim / 2; ++k) {
      const double rate =
          std::pow(base, -2.0 * static_cast<double>(k) / static_cast<double>(dim));
      const double angle = idx[t] * rate;
      out[t * dim + 2 * k] = std::sin(angle);
      out[t * dim + 2 * k + 1] = std::cos(angle);
    }
  }
  return Tensor::FromVector({idx.size(), dim}, std::move(out));
}

std::vector<double> PaceControl(std::span<const double> seconds,
                                double global_factor,
                                std::span<const double> token_factors) {
  if (!(global_factor > 0.0)) throw Error("pace factor must be positive");
  if (!token_factors.empty() && token_factors.size() != seconds.size()) {
    throw Error("pace control: " + std::to_string(token_factors.size()) +
                " token factors for " + std::to_string(seconds.size()) +
                " tokens");
  }
  std::vector<double> out(seconds.size());
  for (std::size_t i = 0; i < seconds.size(); ++i) {
    const double f = token_factors.empty() ? 1.0 : token_factors[i];
    if (!(f > 0.0)) throw Error("token pace factors must be positive");
    out[i] = seconds[i] * f / global_factor;
  }
  return out;
}

// ---- predictors ---------------------------------------------------------------

DurationPredictor::DurationPredictor(ParamStore& ps, const std::string& name,
                                     const DurationPredictorConfig& config,
                                     Rng& rng)
    : latent_dim_(config.latent_dim) {
  rnn_ = BiGru::Create(ps, name + ".rnn", config.input_dim + config.latent_dim,
                       config.rnn_dim, rng);
  projection_ = Linear::Create(ps, name + ".proj", 2 * config.rnn_dim, 1, rng);
  // Small initial weights keep every starting duration near initial_seconds,
  // so a rescaled total is positive from the first step.
  std::vector<double> w = ps[projection_.weight].ToVector();
  for (auto& x : w) x *= 0.02;
  ps.Set(projection_.weight, std::move(w));
  ps.Set(projection_.bias, std::vector<double>{config.initial_seconds});
}

Tensor DurationPredictor::operator()(const ParamStore& ps,
                                     const Tensor& encoded,
                                     const Tensor* latents, double zoneout,
                                     bool training, Rng rng) const {
  Tensor input = encoded;
  if (latent_dim_ > 0) {
    if (!latents || latents->rows() != encoded.rows() ||
        latents->cols() != latent_dim_) {
      throw Error("duration predictor: latents of width " +
                  std::to_string(latent_dim_) + " required for " +
                  std::to_string(encoded.rows()) + " tokens");
    }
    const Tensor parts[] = {encoded, *latents};
    input = ConcatCols(parts);
  }
  const Tensor hidden = rnn_(ps, input, zoneout, training, rng);
  return Reshape(projection_(ps, hidden), {encoded.rows()});
}

RangePredictor::RangePredictor(ParamStore& ps, const std::string& name,
                               const RangePredictorConfig& config, Rng& rng)
    : config_(config) {
  if (!config.learned) return;
  rnn_ = BiGru::Create(ps, name + ".rnn", config.input_dim + 1, config.rnn_dim,
                       rng);
  projection_ = Linear::Create(ps, name + ".proj", 2 * config.rnn_dim, 1, rng);
  // SoftPlus inverse so the initial output is about `initial_frames`.
  const double x = config.initial_frames;
  ps.Set(projection_.bias, std::vector<double>{x + std::log(-std::expm1(-x))});
}

Tensor RangePredictor::operator()(const ParamStore& ps, const Tensor& encoded,
                                  const Tensor& duration_frames,
                                  bool cap_to_twice_duration, double zoneout,
                                  bool training, Rng rng) const {
  const std::size_t n = encoded.rows();
  Tensor sigma;
  if (config_.learned) {
    const Tensor parts[] = {encoded,
                            Reshape(Scale(duration_frames, 0.1), {n, 1})};
    const Tensor hidden = rnn_(ps, ConcatCols(parts), zoneout, training, rng);
    sigma = Reshape(Softplus(projection_(ps, hidden)), {n});
  } else {
    sigma = Tensor::Full({n}, config_.fixed_value);
  }
  if (cap_to_twice_duration) {
    std::vector<double> cap = duration_frames.ToVector();
    for (auto& c : cap) c = std::max(2.0 * c, 0.5);
    sigma = Minimum(sigma, Tensor::FromVector({n}, std::move(cap)));
  }
  return sigma;
}

}  // namespace natts

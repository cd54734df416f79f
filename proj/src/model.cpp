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

#include "natts/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace natts {

void ModelConfig::Finalize() {
  const std::size_t width = encoder.output_dim();
  duration.input_dim = width;
  duration.latent_dim = use_fvae ? fvae.projected_dim : 0;
  range.input_dim = width;
  decoder.input_dim = width + positional_dim;
  decoder.frame_dim = frame_dim;
  fvae.frame_dim = frame_dim;
  fvae.query_dim = width;
}

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.Finalize();
  if (config_.positional_dim % 2 != 0) {
    throw Error("positional_dim must be even");
  }
  const Rng root(seed);
  Rng r1 = root.Split(1), r2 = root.Split(2), r3 = root.Split(3),
      r4 = root.Split(4), r5 = root.Split(5);
  encoder_ = Encoder(params_, "encoder", config_.encoder, r1);
  duration_ = DurationPredictor(params_, "duration", config_.duration, r2);
  range_ = RangePredictor(params_, "range", config_.range, r3);
  decoder_ = Decoder(params_, "decoder", config_.decoder, r4);
  if (config_.use_fvae) fvae_ = Fvae(params_, "fvae", config_.fvae, r5);
}

bool Model::InComponent(std::size_t param, const std::string& component) const {
  const std::string& name = params_.entry(param).name;
  return name.compare(0, component.size() + 1, component + ".") == 0;
}

namespace {

// Integer frames summing to exactly `total` from non-negative fractional
// frame counts.
std::vector<int> IntegerFrames(std::span<const double> fractional, int total,
                               double hop) {
  std::vector<double> clamped(fractional.begin(), fractional.end());
  double sum = 0.0;
  for (auto& v : clamped) {
    v = std::max(v, 0.0);
    sum += v;
  }
  if (!(sum > 0.0)) throw Error("no positive duration to distribute");
  for (auto& v : clamped) v = v * total / sum * hop;
  return SecondsToFrames(clamped, hop, total);
}

}  // namespace

ForwardResult Forward(const Model& model, const ParamStore& ps,
                      std::span<const int> ids, int speaker,
                      const Tensor& target,
                      const std::vector<int>* target_frames,
                      const ForwardOptions& options, Rng rng) {
  const ModelConfig& cfg = model.config();
  const std::size_t n = ids.size();
  const std::size_t T = target.rows();
  ForwardResult out;
  out.encoder = model.encoder()(ps, ids, speaker, options.training, rng.Split(1));
  const Tensor& H = out.encoder.encoded;

  Tensor projected;
  if (const Fvae* fvae = model.fvae()) {
    const Tensor features =
        fvae->SpecEncode(ps, target, options.training, rng.Split(2));
    const Tensor context = fvae->Attend(ps, H, features, &out.attention);
    out.posterior = fvae->Infer(ps, H, context);
    projected = fvae->Project(ps, SampleLatents(*out.posterior, rng.Split(3)));
  }
  out.seconds = model.duration()(ps, H, projected.defined() ? &projected : nullptr,
                                 cfg.encoder.zoneout, options.training,
                                 rng.Split(4));

  if (options.source == DurationSource::kTarget) {
    if (!target_frames || target_frames->size() != n) {
      throw Error("forward: target frames required for this utterance");
    }
    const int total = std::accumulate(target_frames->begin(), target_frames->end(), 0);
    if (static_cast<std::size_t>(total) != T) {
      throw Error("forward: target frames sum to " + std::to_string(total) +
                  " but the spectrogram has " + std::to_string(T) + " frames");
    }
    out.frames = *target_frames;
    out.upsample_frames = Tensor::FromVector(
        {n}, std::vector<double>(out.frames.begin(), out.frames.end()));
  } else {
    const Tensor d = options.detach_duration_path ? out.seconds.Detach() : out.seconds;
    const Tensor d_frames = Scale(d, 1.0 / cfg.hop);
    Tensor total = SumAll(d_frames);
    if (!(total.item() >= 0.5)) {
      throw Error("forward: predicted durations sum to " +
                  std::to_string(total.item()) + " frames");
    }
    if (!options.scale_factor_gradient) total = total.Detach();
    out.upsample_frames =
        Mul(d_frames, Div(Tensor::Scalar(static_cast<double>(T)), total));
    out.frames = IntegerFrames(out.upsample_frames.values(), static_cast<int>(T),
                               cfg.hop);
  }

  out.sigma = model.range()(ps, H, out.upsample_frames, cfg.use_fvae,
                            cfg.encoder.zoneout, options.training, rng.Split(5));
  out.upsample = GaussianUpsample(H, out.upsample_frames, out.sigma, T);
  const Tensor parts[] = {
      out.upsample.upsampled,
      PositionalEmbedding(out.frames, cfg.positional_dim, cfg.positional_base)};
  out.decoded = model.decoder().TeacherForced(ps, ConcatCols(parts), target,
                                              options.training, rng.Split(6));
  return out;
}

}  // namespace natts

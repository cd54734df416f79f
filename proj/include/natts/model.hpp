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

// The full text-to-spectrogram model and its single-utterance forward pass.

#ifndef NATTS_MODEL_HPP_
#define NATTS_MODEL_HPP_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "natts/decoder.hpp"
#include "natts/duration_align.hpp"
#include "natts/encoder.hpp"
#include "natts/fvae.hpp"
#include "natts/nn.hpp"

namespace natts {

struct ModelConfig {
  EncoderConfig encoder;
  DurationPredictorConfig duration;
  RangePredictorConfig range;
  DecoderConfig decoder;
  FvaeConfig fvae;
  bool use_fvae = false;
  std::size_t frame_dim = 16;
  double hop = 0.0125;
  std::size_t positional_dim = 16;
  double positional_base = 10000.0;
  double norm_decay = 0.99;
  bool prenet_dropout_at_inference = true;

  /// Fills the derived widths (encoder output, decoder input, latent width).
  void Finalize();
};

class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const ModelConfig& config() const { return config_; }

  const Encoder& encoder() const { return encoder_; }
  const DurationPredictor& duration() const { return duration_; }
  const RangePredictor& range() const { return range_; }
  const Decoder& decoder() const { return decoder_; }
  const Fvae* fvae() const { return config_.use_fvae ? &fvae_ : nullptr; }

  /// True when the parameter belongs to a component ("encoder", "duration",
  /// "range", "decoder", "fvae").
  bool InComponent(std::size_t param, const std::string& component) const;

 private:
  ModelConfig config_;
  ParamStore params_;
  Encoder encoder_;
  DurationPredictor duration_;
  RangePredictor range_;
  Decoder decoder_;
  Fvae fvae_;
};

/// Where the upsampler takes its durations from.
enum class DurationSource {
  kTarget,           // ground-truth frames
  kPredictedScaled,  // predictions rescaled to the target length
};

struct ForwardOptions {
  DurationSource source = DurationSource::kTarget;
  bool training = true;
  /// Let gradients flow through the T / sum(d) factor.
  bool scale_factor_gradient = true;
  /// Cuts the path from predicted durations into upsampling (test hook).
  bool detach_duration_path = false;
};

struct ForwardResult {
  EncoderOutput encoder;
  Tensor seconds;           // [N] predicted durations
  Tensor upsample_frames;   // [N] frame-unit durations used by the upsampler
  std::vector<int> frames;  // integer frames for positional indices
  Tensor sigma;             // [N]
  UpsampleResult upsample;
  DecoderOutput decoded;
  std::optional<Posterior> posterior;
  Tensor attention;  // [N, T] FVAE attention, when used
};

/// Teacher-forced forward pass over one utterance with target frames
/// `target` ([T, K]). `target_frames` must be given when the source is
/// kTarget.
ForwardResult Forward(const Model& model, const ParamStore& ps,
                      std::span<const int> ids, int speaker,
                      const Tensor& target,
                      const std::vector<int>* target_frames,
                      const ForwardOptions& options, Rng rng);

}  // namespace natts

#endif  // NATTS_MODEL_HPP_

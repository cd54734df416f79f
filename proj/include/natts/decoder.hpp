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

// Frame-by-frame spectrogram decoder: pre-net on the previous frame, two
// unidirectional recurrent layers, a linear projection of the top state and
// the current upsampled vector, and a convolutional residual post-net.

#ifndef NATTS_DECODER_HPP_
#define NATTS_DECODER_HPP_

#include <functional>
#include <string>
#include <vector>

#include "natts/nn.hpp"
#include "natts/tensor.hpp"

namespace natts {

struct DecoderConfig {
  std::size_t input_dim = 0;  // width of the upsampled sequence
  std::size_t frame_dim = 16;
  std::size_t prenet_dims[2] = {32, 32};
  double prenet_dropout = 0.5;
  std::size_t rnn_dim = 64;
  double zoneout = 0.1;
  std::size_t postnet_layers = 3;
  std::size_t postnet_channels = 32;
  std::size_t postnet_kernel = 5;
};

struct DecoderOutput {
  Tensor pre;   // [T, K] before the post-net
  Tensor post;  // [T, K] = pre + residual
};

/// Chooses the frame fed back at step t + 1 given the prediction for step t.
using FeedbackFn = std::function<Tensor(std::size_t t, const Tensor& predicted)>;

class Decoder {
 public:
  Decoder() = default;
  Decoder(ParamStore& ps, const std::string& name, const DecoderConfig& config,
          Rng& rng);

  /// Feeds target frame t-1 at step t. Throws if the lengths differ.
  DecoderOutput TeacherForced(const ParamStore& ps, const Tensor& upsampled,
                              const Tensor& target, bool training,
                              Rng rng) const;

  /// Feeds back its own pre-post-net prediction, or whatever `feedback`
  /// returns. `prenet_dropout` keeps the pre-net masks active; `training`
  /// also enables zoneout. Output length equals the upsampled length.
  DecoderOutput Autoregressive(const ParamStore& ps, const Tensor& upsampled,
                               bool prenet_dropout, bool training, Rng rng,
                               const FeedbackFn& feedback = {}) const;

  Tensor Postnet(const ParamStore& ps, const Tensor& pre) const;

  const DecoderConfig& config() const { return config_; }
  const std::vector<Conv1dLayer>& postnet() const { return postnet_; }

 private:
  struct StepState {
    Tensor h1, h2;
  };
  Tensor Prenet(const ParamStore& ps, const Tensor& frames,
                std::size_t first_frame, bool dropout, const Rng& rng) const;
  Tensor Step(const ParamStore& ps, const Tensor& prenet_row,
              const Tensor& context_gates_row, StepState* state, bool training,
              const Rng& frame_rng) const;

  DecoderConfig config_;
  Linear prenet_[2];
  Gru rnn1_, rnn2_;
  Linear projection_;
  std::vector<Conv1dLayer> postnet_;
};

}  // namespace natts

#endif  // NATTS_DECODER_HPP_

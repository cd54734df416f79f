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

// Token encoder: embedding, a stack of (dropout, running normalisation,
// convolution) blocks, one bidirectional recurrent layer and a speaker
// embedding appended to every position.

#ifndef NATTS_ENCODER_HPP_
#define NATTS_ENCODER_HPP_

#include <span>
#include <string>
#include <vector>

#include "natts/nn.hpp"
#include "natts/tensor.hpp"

namespace natts {

struct EncoderConfig {
  std::size_t vocab_size = 32;
  std::size_t num_speakers = 4;
  std::size_t embed_dim = 32;
  std::size_t conv_layers = 2;
  std::size_t conv_channels = 32;
  std::size_t conv_kernel = 5;
  std::size_t rnn_dim = 24;  // per direction
  std::size_t speaker_dim = 16;
  double dropout = 0.1;
  double zoneout = 0.1;

  std::size_t output_dim() const { return 2 * rnn_dim + speaker_dim; }
};

struct EncoderOutput {
  Tensor encoded;  // [N, output_dim]
  /// Inputs seen by each normalisation layer, for running-statistics updates.
  std::vector<Tensor> norm_inputs;
};

class Encoder {
 public:
  Encoder() = default;
  Encoder(ParamStore& ps, const std::string& name, const EncoderConfig& config,
          Rng& rng);

  /// Throws on ids outside the vocabulary or an unknown speaker.
  EncoderOutput operator()(const ParamStore& ps, std::span<const int> ids,
                           int speaker, bool training, Rng rng) const;

  /// Folds the statistics of one forward pass into the running buffers.
  void UpdateNormStats(ParamStore& ps, const EncoderOutput& out,
                       double decay) const;

  const EncoderConfig& config() const { return config_; }
  std::size_t token_table() const { return embedding_; }

 private:
  EncoderConfig config_;
  std::size_t embedding_ = 0;
  std::size_t speaker_table_ = 0;
  std::vector<RunningNorm> norms_;
  std::vector<Conv1dLayer> convs_;
  BiGru rnn_;
};

}  // namespace natts

#endif  // NATTS_ENCODER_HPP_

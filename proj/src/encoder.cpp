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

#include "natts/encoder.hpp"

#include <cmath>

namespace natts {

Encoder::Encoder(ParamStore& ps, const std::string& name,
                 const EncoderConfig& config, Rng& rng)
    : config_(config) {
  embedding_ = ps.AddUniform(name + ".embedding",
                             {config.vocab_size, config.embed_dim},
                             std::sqrt(3.0), rng);
  speaker_table_ = ps.AddUniform(name + ".speaker_embedding",
                                 {config.num_speakers, config.speaker_dim},
                                 std::sqrt(3.0), rng);
  std::size_t width = config.embed_dim;
  for (std::size_t l = 0; l < config.conv_layers; ++l) {
    const std::string layer = name + ".conv" + std::to_string(l);
    norms_.push_back(RunningNorm::Create(ps, layer + ".norm", width));
    convs_.push_back(Conv1dLayer::Create(ps, layer, width, config.conv_channels,
                                         config.conv_kernel, rng));
    width = config.conv_channels;
  }
  rnn_ = BiGru::Create(ps, name + ".rnn", width, config.rnn_dim, rng);
}

EncoderOutput Encoder::operator()(const ParamStore& ps,
                                  std::span<const int> ids, int speaker,
                                  bool training, Rng rng) const {
  if (ids.empty()) throw Error("encoder: empty token sequence");
  if (speaker < 0 || static_cast<std::size_t>(speaker) >= config_.num_speakers) {
    throw Error("encoder: unknown speaker " + std::to_string(speaker));
  }
  EncoderOutput out;
  Tensor x = EmbeddingLookup(ps[embedding_], ids);
  for (std::size_t l = 0; l < convs_.size(); ++l) {
    if (training) x = Dropout(x, config_.dropout, rng.Split(10 + l));
    out.norm_inputs.push_back(x.Detach());
    // Linear convolutions, no activation between blocks.
    x = convs_[l](ps, norms_[l](ps, x));
  }
  const Tensor hidden = rnn_(ps, x, config_.zoneout, training, rng.Split(1));
  const int speakers[] = {speaker};
  const Tensor spk = EmbeddingLookup(ps[speaker_table_], speakers);
  const Tensor tiled = Add(Tensor::Zeros({ids.size(), config_.speaker_dim}), spk);
  const Tensor parts[] = {hidden, tiled};
  out.encoded = ConcatCols(parts);
  return out;
}

void Encoder::UpdateNormStats(ParamStore& ps, const EncoderOutput& out,
                              double decay) const {
  std::vector<double> mean, var;
  for (std::size_t l = 0; l < norms_.size() && l < out.norm_inputs.size(); ++l) {
    ChannelStats(out.norm_inputs[l], &mean, &var);
    norms_[l].Update(ps, mean, var, decay);
  }
}

}  // namespace natts

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

// Fine-grained variational auto-encoder producing one latent per token. A
// spectrogram encoder summarises the target frames; each token attends over
// them with a dot-product score, and a diagonal Gaussian posterior is formed
// from the token encoding and its attention context.

#ifndef NATTS_FVAE_HPP_
#define NATTS_FVAE_HPP_

#include <string>

#include "natts/nn.hpp"
#include "natts/tensor.hpp"

namespace natts {

struct FvaeConfig {
  std::size_t frame_dim = 16;
  std::size_t query_dim = 64;  // encoder output width
  std::size_t conv_channels = 16;
  std::size_t conv_kernel = 3;
  std::size_t rnn_dim = 16;  // per direction
  std::size_t attention_dim = 16;
  std::size_t latent_dim = 8;
  std::size_t projected_dim = 16;
  double zoneout = 0.1;
};

struct Posterior {
  Tensor mean;     // [N, latent_dim]
  Tensor log_var;  // [N, latent_dim]
};

enum class LatentMode { kZero, kSample };

class Fvae {
 public:
  Fvae() = default;
  Fvae(ParamStore& ps, const std::string& name, const FvaeConfig& config,
       Rng& rng);

  /// Frame features [T, 2 * rnn_dim].
  Tensor SpecEncode(const ParamStore& ps, const Tensor& frames, bool training,
                    Rng rng) const;
  /// Context per token [N, 2 * rnn_dim]; `weights` receives the [N, T]
  /// attention matrix when not null.
  Tensor Attend(const ParamStore& ps, const Tensor& encoded,
                const Tensor& features, Tensor* weights = nullptr) const;
  Posterior Infer(const ParamStore& ps, const Tensor& encoded,
                  const Tensor& context) const;
  /// Projection applied to sampled (or prior) latents before they reach the
  /// duration predictor.
  Tensor Project(const ParamStore& ps, const Tensor& latents) const;

  const FvaeConfig& config() const { return config_; }

 private:
  FvaeConfig config_;
  Conv1dLayer conv_;
  BiGru rnn_;
  std::size_t query_norm_gain_ = 0, query_norm_bias_ = 0;
  std::size_t key_norm_gain_ = 0, key_norm_bias_ = 0;
  Linear query_, key_;
  Linear posterior_;
  Linear projection_;
};

/// Reparameterised draw mean + exp(log_var / 2) * eps.
Tensor SampleLatents(const Posterior& posterior, Rng rng);

/// Sum over tokens of KL(q || N(0, I)), divided by the number of tokens.
Tensor KlTerm(const Posterior& posterior);

/// Prior latents for inference: zeros (the prior mode) or N(0, I) draws.
Tensor InferLatents(std::size_t num_tokens, std::size_t latent_dim,
                    LatentMode mode, Rng rng);

LatentMode ParseLatentMode(const std::string& name);

}  // namespace natts

#endif  // NATTS_FVAE_HPP_

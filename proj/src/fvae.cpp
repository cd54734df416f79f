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

#include "natts/fvae.hpp"

#include <cmath>

namespace natts {

Fvae::Fvae(ParamStore& ps, const std::string& name, const FvaeConfig& config,
           Rng& rng)
    : config_(config) {
  conv_ = Conv1dLayer::Create(ps, name + ".conv", config.frame_dim,
                              config.conv_channels, config.conv_kernel, rng);
  rnn_ = BiGru::Create(ps, name + ".rnn", config.conv_channels, config.rnn_dim,
                       rng);
  const std::size_t feat = 2 * config.rnn_dim;
  query_norm_gain_ = ps.AddConstant(name + ".query_norm.gain", {config.query_dim}, 1.0);
  query_norm_bias_ = ps.AddConstant(name + ".query_norm.bias", {config.query_dim}, 0.0);
  key_norm_gain_ = ps.AddConstant(name + ".key_norm.gain", {feat}, 1.0);
  key_norm_bias_ = ps.AddConstant(name + ".key_norm.bias", {feat}, 0.0);
  query_ = Linear::Create(ps, name + ".query", config.query_dim,
                          config.attention_dim, rng);
  key_ = Linear::Create(ps, name + ".key", feat, config.attention_dim, rng);
  posterior_ = Linear::Create(ps, name + ".posterior", config.query_dim + feat,
                              2 * config.latent_dim, rng);
  projection_ = Linear::Create(ps, name + ".latent_proj", config.latent_dim,
                               config.projected_dim, rng);
}

Tensor Fvae::SpecEncode(const ParamStore& ps, const Tensor& frames,
                        bool training, Rng rng) const {
  if (frames.rows() == 0) throw Error("fvae: empty spectrogram");
  const Tensor x = Relu(conv_(ps, frames));
  return rnn_(ps, x, config_.zoneout, training, rng);
}

Tensor Fvae::Attend(const ParamStore& ps, const Tensor& encoded,
                    const Tensor& features, Tensor* weights) const {
  const Tensor q = query_(
      ps, LayerNorm(encoded, ps[query_norm_gain_], ps[query_norm_bias_]));
  const Tensor k =
      key_(ps, LayerNorm(features, ps[key_norm_gain_], ps[key_norm_bias_]));
  const Tensor w = Softmax(MatMul(q, Transpose(k)));  // [N, T]
  if (weights) *weights = w;
  return MatMul(w, features);
}

Posterior Fvae::Infer(const ParamStore& ps, const Tensor& encoded,
                      const Tensor& context) const {
  const Tensor parts[] = {encoded, context};
  const Tensor stats = posterior_(ps, ConcatCols(parts));
  const std::size_t L = config_.latent_dim;
  return {SliceCols(stats, 0, L), SliceCols(stats, L, 2 * L)};
}

Tensor Fvae::Project(const ParamStore& ps, const Tensor& latents) const {
  return projection_(ps, latents);
}

Tensor SampleLatents(const Posterior& posterior, Rng rng) {
  std::vector<double> eps(posterior.mean.numel());
  for (auto& e : eps) e = rng.Normal();
  const Tensor noise = Tensor::FromVector(posterior.mean.shape(), std::move(eps));
  return Add(posterior.mean, Mul(Exp(Scale(posterior.log_var, 0.5)), noise));
}

Tensor KlTerm(const Posterior& posterior) {
  // 0.5 * (mu^2 + sigma^2 - 1 - log sigma^2)
  const Tensor per_dim =
      Scale(Sub(Add(Square(posterior.mean), Exp(posterior.log_var)),
                AddScalar(posterior.log_var, 1.0)),
            0.5);
  return Scale(SumAll(per_dim), 1.0 / static_cast<double>(posterior.mean.rows()));
}

Tensor InferLatents(std::size_t num_tokens, std::size_t latent_dim,
                    LatentMode mode, Rng rng) {
  if (mode == LatentMode::kZero) return Tensor::Zeros({num_tokens, latent_dim});
  std::vector<double> z(num_tokens * latent_dim);
  for (auto& v : z) v = rng.Normal();
  return Tensor::Matrix(num_tokens, latent_dim, std::move(z));
}

LatentMode ParseLatentMode(const std::string& name) {
  if (name == "zero") return LatentMode::kZero;
  if (name == "sample") return LatentMode::kSample;
  throw Error("unknown latent mode '" + name + "' (expected zero or sample)");
}

}  // namespace natts

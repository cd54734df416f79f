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


#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "natts/model.hpp"
#include "natts/training.hpp"
#include "natts/verify.hpp"

namespace natts {
namespace {

std::vector<double> Random(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = 2.0 * rng.Uniform() - 1.0;
  return v;
}

TEST_CASE("encoder shapes and errors") {
  const ModelConfig mc = MakeModelConfig(TinyConfig(Regime::kSupervised));
  Model model(mc, 1);
  const int ids[] = {2, 3, 4, 0, 1};
  const EncoderOutput out = model.encoder()(model.params(), ids, 1, false, Rng(1));
  CHECK(out.encoded.rows() == 5);
  CHECK(out.encoded.cols() == mc.encoder.output_dim());
  CHECK_THROWS_AS(model.encoder()(model.params(), ids, 2, false, Rng(1)), Error);
  CHECK_THROWS_AS(model.encoder()(model.params(), std::span<const int>(), 0, false, Rng(1)),
                  Error);
  const int bad[] = {2, 99};
  CHECK_THROWS_AS(model.encoder()(model.params(), bad, 0, false, Rng(1)), Error);
}

TEST_CASE("encoder speaker embedding is tiled across tokens") {
  const ModelConfig mc = MakeModelConfig(TinyConfig(Regime::kSupervised));
  Model model(mc, 2);
  const int ids[] = {2, 5, 3};
  const EncoderOutput out = model.encoder()(model.params(), ids, 0, false, Rng(1));
  const std::size_t w = mc.encoder.output_dim();
  const std::size_t s = mc.encoder.speaker_dim;
  for (std::size_t r = 1; r < 3; ++r) {
    for (std::size_t c = w - s; c < w; ++c) {
      CHECK(out.encoded.values()[r * w + c] == out.encoded.values()[c]);
    }
  }
}

TEST_CASE("running norm statistics move towards observed values") {
  const ModelConfig mc = MakeModelConfig(TinyConfig(Regime::kSupervised));
  Model model(mc, 3);
  const int ids[] = {2, 5, 3, 4, 0, 1};
  const EncoderOutput out = model.encoder()(model.params(), ids, 0, true, Rng(1));
  const std::size_t mean = model.params().Find("encoder.conv0.norm.running_mean");
  const auto before = model.params()[mean].ToVector();
  model.encoder().UpdateNormStats(model.params(), out, 0.9);
  const auto after = model.params()[mean].ToVector();
  CHECK(before != after);
  CHECK_FALSE(model.params().entry(mean).trainable);
}

TEST_CASE("decoder: teacher forcing equals oracle-fed autoregression") {
  const ModelConfig mc = MakeModelConfig(TinyConfig(Regime::kSupervised));
  Model model(mc, 4);
  const Decoder& dec = model.decoder();
  Rng rng(5);
  const std::size_t T = 11, K = mc.frame_dim;
  const Tensor u = Tensor::Matrix(T, dec.config().input_dim, Random(rng, T * dec.config().input_dim));
  const Tensor y = Tensor::Matrix(T, K, Random(rng, T * K));
  for (bool training : {false, true}) {
    const DecoderOutput tf = dec.TeacherForced(model.params(), u, y, training, Rng(6));
    const DecoderOutput ar = dec.Autoregressive(
        model.params(), u, training, training, Rng(6),
        [&](std::size_t t, const Tensor&) { return SliceRows(y, t, t + 1); });
    const auto a = tf.post.values();
    const auto b = ar.post.values();
    CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  }
  CHECK_THROWS_AS(dec.TeacherForced(model.params(), u, SliceRows(y, 0, T - 1), false, Rng(6)),
                  Error);
}

TEST_CASE("decoder output length follows the upsampled length") {
  const ModelConfig mc = MakeModelConfig(TinyConfig(Regime::kSupervised));
  Model model(mc, 4);
  const Decoder& dec = model.decoder();
  Rng rng(7);
  for (std::size_t T : {1u, 2u, 9u}) {
    const Tensor u = Tensor::Matrix(T, dec.config().input_dim, Random(rng, T * dec.config().input_dim));
    const DecoderOutput out = dec.Autoregressive(model.params(), u, true, false, Rng(1));
    CHECK(out.pre.rows() == T);
    CHECK(out.post.cols() == mc.frame_dim);
  }
}

TEST_CASE("zero post-net weights leave the prediction unchanged") {
  const ModelConfig mc = MakeModelConfig(TinyConfig(Regime::kSupervised));
  Model model(mc, 8);
  ParamStore& ps = model.params();
  const Conv1dLayer& last = model.decoder().postnet().back();
  ps.Set(last.weight, std::vector<double>(ps[last.weight].numel(), 0.0));
  Rng rng(9);
  const Tensor pre = Tensor::Matrix(6, mc.frame_dim, Random(rng, 6 * mc.frame_dim));
  const Tensor post = model.decoder().Postnet(ps, pre);
  const auto a = pre.values();
  const auto b = post.values();
  CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
}

TEST_CASE("KL term") {
  const Tensor zero = Tensor::Zeros({3, 2});
  CHECK(KlTerm({zero, zero}).item() == 0.0);
  // One token, mean 1 and log variance 0 in both dims: 2 * 0.5 = 1.
  const Tensor one = Tensor::Full({1, 2}, 1.0);
  CHECK(KlTerm({one, Tensor::Zeros({1, 2})}).item() == doctest::Approx(1.0));
  // Log variance l alone: 0.5 (e^l - 1 - l).
  const Tensor lv = Tensor::Full({1, 1}, 0.7);
  CHECK(KlTerm({Tensor::Zeros({1, 1}), lv}).item() ==
        doctest::Approx(0.5 * (std::exp(0.7) - 1.0 - 0.7)));
}

TEST_CASE("prior latents") {
  const Tensor z = InferLatents(4, 3, LatentMode::kZero, Rng(1));
  CHECK(z.rows() == 4);
  for (double v : z.values()) CHECK(v == 0.0);
  const Tensor s = InferLatents(4, 3, LatentMode::kSample, Rng(1));
  CHECK(std::any_of(s.values().begin(), s.values().end(), [](double v) { return v != 0.0; }));
  CHECK(ParseLatentMode("zero") == LatentMode::kZero);
  CHECK(ParseLatentMode("sample") == LatentMode::kSample);
  CHECK_THROWS_AS(ParseLatentMode("mean"), Error);
}

TEST_CASE("reparameterised sample with zero variance is the mean") {
  Rng rng(2);
  const Tensor mean = Tensor::Matrix(2, 3, Random(rng, 6));
  const Tensor lv = Tensor::Full({2, 3}, -200.0);
  const Tensor z = SampleLatents({mean, lv}, Rng(3));
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(z.values()[i] == doctest::Approx(mean.values()[i]).epsilon(1e-12));
  }
}

TEST_CASE("latent attention is a distribution over frames") {
  const RunConfig cfg = TinyConfig(Regime::kUnsupervised);
  const Dataset data = BuildDataset(cfg);
  Model model(MakeModelConfig(cfg), 9);
  const Utterance& u = data.utterances[0];
  const Tensor y = Tensor::Matrix(u.num_frames, data.vocab.dim, u.frames);
  ForwardOptions opts;
  opts.source = DurationSource::kPredictedScaled;
  opts.training = false;
  const ForwardResult f = Forward(model, model.params(), u.ids, u.speaker, y, nullptr, opts, Rng(1));
  REQUIRE(f.posterior);
  CHECK(f.attention.rows() == u.ids.size());
  CHECK(f.attention.cols() == u.num_frames);
  for (std::size_t i = 0; i < u.ids.size(); ++i) {
    double sum = 0.0;
    for (std::size_t t = 0; t < u.num_frames; ++t) sum += f.attention.values()[i * u.num_frames + t];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("forward with rescaled predictions covers the target length") {
  const RunConfig cfg = TinyConfig(Regime::kUnsupervised);
  const Dataset data = BuildDataset(cfg);
  Model model(MakeModelConfig(cfg), 10);
  for (std::size_t k = 0; k < 4; ++k) {
    const Utterance& u = data.utterances[k];
    const Tensor y = Tensor::Matrix(u.num_frames, data.vocab.dim, u.frames);
    ForwardOptions opts;
    opts.source = DurationSource::kPredictedScaled;
    const ForwardResult f = Forward(model, model.params(), u.ids, u.speaker, y, nullptr, opts, Rng(k));
    double total = 0.0;
    for (double d : f.upsample_frames.values()) total += d;
    CHECK(total == doctest::Approx(static_cast<double>(u.num_frames)).epsilon(1e-12));
    int frames = 0;
    for (int v : f.frames) frames += v;
    CHECK(frames == static_cast<int>(u.num_frames));
    CHECK(f.decoded.post.rows() == u.num_frames);
    for (std::size_t i = 0; i < u.ids.size(); ++i) {
      CHECK(f.sigma.values()[i] > 0.0);
      CHECK(f.sigma.values()[i] <= std::max(2.0 * f.upsample_frames.values()[i], 0.5) + 1e-12);
    }
  }
}

TEST_CASE("forward with target frames uses them for upsampling") {
  const RunConfig cfg = TinyConfig(Regime::kSupervised);
  const Dataset data = BuildDataset(cfg);
  Model model(MakeModelConfig(cfg), 11);
  const Utterance& u = data.utterances[1];
  const std::vector<int> frames = TargetFrames(u, data.vocab.hop);
  const Tensor y = Tensor::Matrix(u.num_frames, data.vocab.dim, u.frames);
  ForwardOptions opts;
  const ForwardResult f = Forward(model, model.params(), u.ids, u.speaker, y, &frames, opts, Rng(1));
  CHECK(f.frames == frames);
  CHECK_FALSE(f.posterior);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    CHECK(f.upsample_frames.values()[i] == frames[i]);
  }
}

TEST_CASE("zero latent path matches a predictor that ignores latents") {
  const RunConfig cfg = TinyConfig(Regime::kSemi);
  Model model(MakeModelConfig(cfg), 12);
  CHECK(model.fvae() != nullptr);
  Model plain(MakeModelConfig(TinyConfig(Regime::kSupervised)), 12);
  CHECK(plain.fvae() == nullptr);
  std::size_t fvae_params = 0;
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    fvae_params += model.InComponent(i, "fvae");
  }
  CHECK(fvae_params > 0);
}

}  // namespace
}  // namespace natts

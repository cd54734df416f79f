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

#include "natts/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "natts/duration_align.hpp"
#include "natts/eval.hpp"
#include "natts/grad_check.hpp"

namespace natts {

namespace {

std::string Format(const char* fmt, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), fmt, a, b);
  return buf;
}

void Expect(SuiteResult* s, const std::string& name, bool ok, std::string detail = "") {
  s->checks.push_back({name, ok, std::move(detail)});
}

std::vector<double> RandomVector(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * rng.Uniform();
  return v;
}

std::vector<std::size_t> PickBatch(const Dataset& data, Regime regime) {
  if (regime == Regime::kSemi) {
    std::vector<std::size_t> batch;
    for (bool want : {true, false}) {
      for (std::size_t i = 0; i < data.utterances.size(); ++i) {
        if (data.utterances[i].labeled() == want) {
          batch.push_back(i);
          break;
        }
      }
    }
    return batch;
  }
  return {0, 1};
}

constexpr Regime kRegimes[] = {Regime::kSupervised, Regime::kSemi,
                               Regime::kUnsupervised, Regime::kUnsupervisedNoFvae};

// ---- suites ---------------------------------------------------------------------

void GradientSuite(SuiteResult* s, std::uint64_t seed) {
  const GradientSweep g = MeasureModelGradients(20, seed);
  Expect(s, "full loss gradients, 20 instances, rel err < 1e-4",
         g.max_rel_error < 1e-4,
         Format("max rel err %.3g over %.0f coordinates", g.max_rel_error,
                static_cast<double>(g.coords)) + " (" + g.worst + ")");
  Expect(s, "gradient sweep under 60 s", g.seconds < 60.0,
         Format("%.1f s", g.seconds));

  // Upsampling alone, against encoder rows, durations and ranges.
  Rng rng = Rng(seed).Split(2);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.Below(6);
    const Tensor h = Tensor::FromVector({n, 3}, RandomVector(rng, n * 3, -1, 1));
    const Tensor d = Tensor::FromVector({n}, RandomVector(rng, n, 1.0, 6.0));
    const Tensor r = Tensor::FromVector({n}, RandomVector(rng, n, 0.5, 3.0));
    const Tensor w = Tensor::FromVector({1, 3}, RandomVector(rng, 3, -1, 1));
    const Tensor params[] = {h, d, r};
    const auto report = GradCheck(
        [&](std::span<const Tensor> p) {
          return SumAll(Mul(GaussianUpsample(p[0], p[1], p[2], 12).upsampled, w));
        },
        params, {.tolerance = 1e-4});
    worst = std::max(worst, report.max_rel_error);
  }
  Expect(s, "upsampling gradients w.r.t. encoder rows, durations and ranges",
         worst < 1e-4, Format("max rel err %.3g", worst));
}

void UpsamplingSuite(SuiteResult* s, std::uint64_t seed) {
  Rng rng = Rng(seed).Split(3);
  double row_err = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.Below(10);
    const Tensor h = Tensor::FromVector({n, 2}, RandomVector(rng, n * 2, -1, 1));
    const Tensor d = Tensor::FromVector({n}, RandomVector(rng, n, 0.5, 8.0));
    const Tensor r = Tensor::FromVector({n}, RandomVector(rng, n, 0.1, 5.0));
    const auto up = GaussianUpsample(h, d, r);
    const auto w = up.weights.values();
    for (std::size_t t = 0; t < up.weights.rows(); ++t) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) sum += w[t * n + i];
      row_err = std::max(row_err, std::abs(sum - 1.0));
    }
  }
  Expect(s, "weights rows sum to one within 1e-9", row_err <= 1e-9,
         Format("max deviation %.3g", row_err));

  double center_err = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.Below(20);
    const std::vector<double> d = RandomVector(rng, n, 0.0, 10.0);
    const Tensor c = GaussianCenters(Tensor::FromVector({n}, d));
    double before = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      center_err = std::max(center_err, std::abs(c.values()[i] - (before + d[i] / 2)));
      before += d[i];
    }
  }
  Expect(s, "centers equal d_i / 2 + preceding sum (1000 vectors)",
         center_err <= 1e-12, Format("max deviation %.3g", center_err));

  int mismatched = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.Below(10);
    std::vector<int> frames(n);
    std::vector<double> d(n), r(n);
    for (std::size_t i = 0; i < n; ++i) {
      frames[i] = 1 + static_cast<int>(rng.Below(8));
      d[i] = frames[i];
      r[i] = 1e-3 * frames[i];
    }
    const Tensor h = Tensor::Zeros({n, 1});
    const auto up = GaussianUpsample(h, Tensor::FromVector({n}, d),
                                     Tensor::FromVector({n}, r));
    const std::vector<int> owner = RepeatAssignment(frames);
    const auto w = up.weights.values();
    for (std::size_t t = 0; t < owner.size(); ++t) {
      const auto row = w.subspan(t * n, n);
      const auto arg = std::max_element(row.begin(), row.end()) - row.begin();
      if (arg != owner[t]) {
        ++mismatched;
        break;
      }
    }
  }
  Expect(s, "sigma = 1e-3 x frames: argmax equals repeat assignment (100 instances)",
         mismatched == 0, std::to_string(mismatched) + " instances differ");
}

void PositionalSuite(SuiteResult* s, std::uint64_t) {
  const int frames[] = {2, 1, 3};
  const std::vector<int> idx = WithinTokenIndices(frames);
  Expect(s, "[2,1,3] -> [1,2,1,1,2,3]", idx == std::vector<int>{1, 2, 1, 1, 2, 3});
  const Tensor e = PositionalEmbedding(frames, 4, 10000.0);
  double err = 0.0;
  for (std::size_t t = 0; t < idx.size(); ++t) {
    for (std::size_t k = 0; k < 2; ++k) {
      const double angle = idx[t] / std::pow(10000.0, 2.0 * k / 4.0);
      err = std::max(err, std::abs(e.values()[t * 4 + 2 * k] - std::sin(angle)));
      err = std::max(err, std::abs(e.values()[t * 4 + 2 * k + 1] - std::cos(angle)));
    }
  }
  Expect(s, "sinusoid values", err < 1e-15, Format("max deviation %.3g", err));
}

void LossSuite(SuiteResult* s, std::uint64_t seed) {
  for (Regime regime : kRegimes) {
    const RunConfig cfg = TinyConfig(regime, seed);
    const Dataset data = BuildDataset(cfg);
    const TrainConfig tc = MakeTrainConfig(cfg);
    Model model(MakeModelConfig(cfg), DeriveSeed(seed, 3));
    const auto batch = PickBatch(data, regime);
    const BatchLoss loss =
        ComputeBatchLoss(model, model.params(), data, batch, tc, true, Rng(seed));
    const LossReport& r = loss.report;
    const double sum = r.spec + tc.weights.duration * r.duration +
                       tc.weights.utterance * r.utterance + tc.weights.kl * r.kl;
    const double err = std::abs(r.total - sum);
    Expect(s, RegimeName(regime) + ": total equals weighted terms within 1e-12",
           err <= 1e-12, Format("deviation %.3g", err));
  }

  RunConfig cfg = TinyConfig(Regime::kSupervised, seed);
  cfg.Set("lambda_dur", "0");
  const Dataset data = BuildDataset(cfg);
  const TrainConfig tc = MakeTrainConfig(cfg);
  Model model(MakeModelConfig(cfg), DeriveSeed(seed, 3));
  model.params().ResetLeaves();
  const std::size_t batch[] = {0, 1};
  const BatchLoss loss =
      ComputeBatchLoss(model, model.params(), data, batch, tc, true, Rng(seed));
  Backward(loss.total);
  double largest = 0.0;
  const ParamStore& ps = model.params();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!model.InComponent(i, "duration")) continue;
    for (double g : ps[i].grad()) largest = std::max(largest, std::abs(g));
  }
  Expect(s, "lambda_dur = 0 supervised: duration predictor gradients are zero",
         largest == 0.0, Format("largest |grad| %.3g", largest));
}

void MetricSuite(SuiteResult* s, std::uint64_t seed) {
  RunConfig cfg;
  cfg.Set("seed", std::to_string(seed));
  cfg.Set("utts", "20");
  const Dataset data = BuildDataset(cfg);
  const EvalReport gt = Evaluate(data);
  Expect(s, "ground truth: UDR 0 and WDR 0", gt.udr == 0.0 && gt.del == 0.0,
         Format("UDR %.3g, WDR %.3g", gt.udr, gt.del));

  const VocabSpec& vocab = data.vocab;
  const std::size_t K = static_cast<std::size_t>(vocab.dim);
  const std::size_t per_second = static_cast<std::size_t>(std::lround(1.0 / vocab.hop));
  const Utterance base = FixtureUtterance(vocab, 0, 8 * per_second, Rng(seed).Split(11));
  const std::vector<int> frames = TargetFrames(base, vocab.hop);
  const std::size_t mid =
      std::accumulate(frames.begin(), frames.begin() + frames.size() / 2, std::size_t{0});
  const Utterance spliced =
      InsertGarbage(base, mid, 2 * per_second, 0.5, K, Rng(seed).Split(12));
  const EvalRow row = EvaluateUtterance(spliced, vocab, {});
  Expect(s, "2 s garbage in a 10 s utterance: UDR 20% within one frame",
         std::abs(row.udr() * row.seconds - 2.0) <= vocab.hop + 1e-9,
         Format("UDR %.4f of %.2f s", row.udr(), row.seconds));

  const Utterance short_garbage = InsertGarbage(
      base, mid, static_cast<std::size_t>(0.9 * per_second), 0.5, K, Rng(seed).Split(13));
  ForcedAlignment a;
  const EvalRow short_row = EvaluateUtterance(short_garbage, vocab, {}, &a);
  Expect(s, "0.9 s garbage contributes nothing to UDR",
         short_row.long_unaligned_seconds == 0.0 && a.feasible && !a.unaligned.empty(),
         Format("long unaligned %.3f s", short_row.long_unaligned_seconds));

  const Utterance& utt = data.utterances[0];
  const Utterance zeroed = ZeroWord(utt, utt.words.size() / 2, vocab.hop, K);
  const EvalRow zero_row = EvaluateUtterance(zeroed, vocab, {});
  Expect(s, "one word zeroed: exactly one deletion",
         zero_row.words.deletions == 1 && zero_row.words.insertions == 0 &&
             zero_row.words.substitutions == 0,
         Format("del %.0f, other errors %.0f", static_cast<double>(zero_row.words.deletions),
                static_cast<double>(zero_row.words.insertions +
                                    zero_row.words.substitutions)));

  Rng rng = Rng(seed).Split(14);
  double identity = 0.0;
  bool counts = true;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> ref(1 + rng.Below(8)), hyp(rng.Below(9));
    for (auto& w : ref) w = std::to_string(rng.Below(4));
    for (auto& w : hyp) w = std::to_string(rng.Below(4));
    const WerBreakdown b = WerCounts(ref, hyp);
    identity = std::max(identity, std::abs(b.wer() - (b.del() + b.ins() + b.sub())));
    counts &= b.deletions + b.insertions + b.substitutions == b.distance;
  }
  Expect(s, "WER = del + ins + sub", identity == 0.0 && counts,
         Format("deviation %.3g", identity));
}

void CorpusSuite(SuiteResult* s, std::uint64_t seed) {
  RunConfig cfg;
  cfg.Set("seed", std::to_string(seed));
  cfg.Set("utts", "30");
  const Dataset a = BuildDataset(cfg);
  const Dataset b = BuildDataset(cfg);
  bool same = a.utterances.size() == b.utterances.size();
  for (std::size_t i = 0; same && i < a.utterances.size(); ++i) {
    same = a.utterances[i].frames == b.utterances[i].frames &&
           a.utterances[i].ids == b.utterances[i].ids;
  }
  Expect(s, "generation is deterministic", same);
  bool lengths = true;
  double accuracy = 1.0;
  for (const auto& u : a.utterances) {
    const std::vector<int> f = TargetFrames(u, a.vocab.hop);
    lengths &= std::accumulate(f.begin(), f.end(), std::size_t{0}) == u.num_frames;
    accuracy = std::min(accuracy, TemplateAccuracy(u.frames, u.num_frames, u.ids,
                                                   RepeatAssignment(f), a.vocab));
  }
  Expect(s, "frame counts match durations", lengths);
  Expect(s, "noise-free frames decode to their tokens", accuracy == 1.0,
         Format("worst accuracy %.4f", accuracy));
}

void DecoderSuite(SuiteResult* s, std::uint64_t seed) {
  const RunConfig cfg = TinyConfig(Regime::kSupervised, seed);
  Model model(MakeModelConfig(cfg), DeriveSeed(seed, 3));
  const ParamStore& ps = model.params();
  const Decoder& dec = model.decoder();
  Rng rng = Rng(seed).Split(15);
  const std::size_t T = 9;
  const std::size_t K = dec.config().frame_dim;
  const Tensor u = Tensor::FromVector({T, dec.config().input_dim},
                                      RandomVector(rng, T * dec.config().input_dim, -1, 1));
  const Tensor y = Tensor::FromVector({T, K}, RandomVector(rng, T * K, -1, 1));
  NoGradGuard no_grad;
  const DecoderOutput tf = dec.TeacherForced(ps, u, y, true, Rng(7));
  const DecoderOutput ar = dec.Autoregressive(
      ps, u, true, true, Rng(7),
      [&](std::size_t t, const Tensor&) { return SliceRows(y, t, t + 1); });
  bool identical = true;
  for (std::size_t i = 0; i < tf.pre.numel(); ++i) {
    identical &= tf.pre.values()[i] == ar.pre.values()[i];
  }
  Expect(s, "teacher forcing equals oracle-fed autoregression bit for bit", identical);

  std::vector<double> changed = y.ToVector();
  for (std::size_t k = 0; k < K; ++k) changed[5 * K + k] += 1.0;
  const DecoderOutput tf2 =
      dec.TeacherForced(ps, u, Tensor::FromVector({T, K}, changed), true, Rng(7));
  bool causal = true;
  for (std::size_t i = 0; i < 6 * K; ++i) {
    causal &= tf.pre.values()[i] == tf2.pre.values()[i];
  }
  Expect(s, "frame t depends only on targets before t", causal);
}

}  // namespace

bool SuiteResult::passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const CheckResult& c) { return c.passed; });
}

const std::vector<std::string>& SuiteNames() {
  static const std::vector<std::string> names = {
      "gradients", "upsampling", "positional", "losses",
      "metrics",   "corpus",     "decoder"};
  return names;
}

SuiteResult RunSuite(const std::string& name, std::uint64_t seed) {
  SuiteResult s;
  s.name = name;
  const auto start = std::chrono::steady_clock::now();
  if (name == "gradients") {
    GradientSuite(&s, seed);
  } else if (name == "upsampling") {
    UpsamplingSuite(&s, seed);
  } else if (name == "positional") {
    PositionalSuite(&s, seed);
  } else if (name == "losses") {
    LossSuite(&s, seed);
  } else if (name == "metrics") {
    MetricSuite(&s, seed);
  } else if (name == "corpus") {
    CorpusSuite(&s, seed);
  } else if (name == "decoder") {
    DecoderSuite(&s, seed);
  } else {
    throw Error("unknown verify suite '" + name + "'");
  }
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                  .count();
  return s;
}

RunConfig TinyConfig(Regime regime, std::uint64_t seed) {
  RunConfig c;
  const std::pair<const char*, std::string> settings[] = {
      {"seed", std::to_string(seed)},
      {"utts", "12"},
      {"vocab_size", "8"},
      {"frame_dim", "6"},
      {"speakers", "2"},
      {"min_tokens", "3"},
      {"max_tokens", "5"},
      {"max_word_tokens", "2"},
      {"embed_dim", "8"},
      {"encoder_conv_channels", "6"},
      {"encoder_conv_kernel", "3"},
      {"encoder_rnn_dim", "5"},
      {"speaker_dim", "3"},
      {"duration_rnn_dim", "4"},
      {"range_rnn_dim", "4"},
      {"positional_dim", "4"},
      {"prenet_dim", "6"},
      {"decoder_rnn_dim", "8"},
      {"postnet_layers", "2"},
      {"postnet_channels", "6"},
      {"postnet_kernel", "3"},
      {"fvae_conv_channels", "4"},
      {"fvae_rnn_dim", "4"},
      {"attention_dim", "4"},
      {"latent_dim", "3"},
      {"latent_proj_dim", "4"},
      {"batch_size", "2"},
      {"regime", RegimeName(regime)},
      {"labeled_fraction", regime == Regime::kSemi ? "0.5" : "1.0"},
  };
  for (const auto& [k, v] : settings) c.Set(k, v);
  return c;
}

Dataset BuildDataset(const RunConfig& config) {
  const auto seed = static_cast<std::uint64_t>(config.GetInt("seed"));
  const VocabSpec vocab = MakeVocab(MakeVocabOptions(config), DeriveSeed(seed, 1));
  Dataset data = GenerateCorpus(vocab, MakeCorpusOptions(config), DeriveSeed(seed, 2));
  const double fraction = config.GetDouble("labeled_fraction");
  if (fraction < 1.0) data = SplitLabels(std::move(data), fraction, DeriveSeed(seed, 5));
  return data;
}

GradientSweep MeasureModelGradients(std::size_t instances, std::uint64_t seed,
                                    std::size_t coords_per_param) {
  GradientSweep out;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t k = 0; k < instances; ++k) {
    const Regime regime = kRegimes[k % 4];
    const std::uint64_t s = seed + k;
    const RunConfig cfg = TinyConfig(regime, s);
    const Dataset data = BuildDataset(cfg);
    const TrainConfig tc = MakeTrainConfig(cfg);
    Model model(MakeModelConfig(cfg), DeriveSeed(s, 3));
    const auto batch = PickBatch(data, regime);
    std::vector<std::size_t> index;
    std::vector<Tensor> params;
    std::vector<std::string> names;
    // Jitter away from the initial point, where zero biases meet the zero
    // first decoder input exactly at the ReLU kink.
    Rng jitter = Rng(s).Split(8);
    for (std::size_t i = 0; i < model.params().size(); ++i) {
      if (!model.params().entry(i).trainable) continue;
      std::vector<double> v = model.params()[i].ToVector();
      for (auto& x : v) x = x * (1.0 + 0.1 * jitter.Normal()) + 0.01 * jitter.Normal();
      model.params().Set(i, std::move(v));
      index.push_back(i);
      params.push_back(model.params()[i]);
      names.push_back(model.params().entry(i).name);
    }
    auto loss = [&](std::span<const Tensor> p) {
      ParamStore ps = model.params();
      for (std::size_t j = 0; j < p.size(); ++j) ps.Bind(index[j], p[j]);
      return ComputeBatchLoss(model, ps, data, batch, tc, true, Rng(s).Split(9)).total;
    };
    // Central differences resolve gradients down to about 1e-6 of the loss
    // value; smaller components are compared against that floor.
    double scale = 1.0;
    {
      NoGradGuard no_grad;
      scale = std::max(1.0, std::abs(loss(params).item()));
    }
    const auto report = GradCheck(
        loss, params,
        {.step = 1e-5, .tolerance = 1e-4, .abs_floor = 1e-6 * scale,
         .max_coords_per_param = coords_per_param, .seed = s},
        names);
    ++out.instances;
    for (const auto& p : report.params) {
      out.coords += p.coords_checked;
      if (p.max_rel_error > out.max_rel_error || p.non_finite > 0) {
        out.max_rel_error = p.non_finite > 0 ? INFINITY : p.max_rel_error;
        out.worst = RegimeName(regime) + "/" + p.name;
      }
    }
  }
  out.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace natts

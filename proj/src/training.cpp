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

#include "natts/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace natts {

using nlohmann::json;

Regime ParseRegime(const std::string& name) {
  if (name == "supervised") return Regime::kSupervised;
  if (name == "semi") return Regime::kSemi;
  if (name == "unsupervised") return Regime::kUnsupervised;
  if (name == "unsupervised-no-fvae") return Regime::kUnsupervisedNoFvae;
  throw Error("unknown regime '" + name +
              "' (expected supervised|semi|unsupervised|unsupervised-no-fvae)");
}

std::string RegimeName(Regime regime) {
  switch (regime) {
    case Regime::kSupervised: return "supervised";
    case Regime::kSemi: return "semi";
    case Regime::kUnsupervised: return "unsupervised";
    case Regime::kUnsupervisedNoFvae: return "unsupervised-no-fvae";
  }
  return "?";
}

LossWeights LossWeights::ForRegime(Regime regime) {
  switch (regime) {
    case Regime::kSupervised: return {2.0, 0.0, 0.0};
    case Regime::kSemi: return {100.0, 100.0, 1e-3};
    case Regime::kUnsupervised: return {0.0, 1.0, 1e-4};
    case Regime::kUnsupervisedNoFvae: return {0.0, 1.0, 0.0};
  }
  return {};
}

// ---- losses -------------------------------------------------------------------------

Tensor LossDuration(const Tensor& predicted, std::span<const double> target) {
  if (predicted.numel() != target.size()) {
    throw Error("duration loss: " + std::to_string(predicted.numel()) +
                " predictions for " + std::to_string(target.size()) + " targets");
  }
  const Tensor t = Tensor::FromVector(
      {target.size()}, std::vector<double>(target.begin(), target.end()));
  return MeanAll(Square(Sub(Reshape(predicted, {target.size()}), t)));
}

Tensor LossSpec(const Tensor& pre, const Tensor& post, const Tensor& target) {
  if (pre.shape() != target.shape() || post.shape() != target.shape()) {
    throw Error("spectrogram loss: shapes " + ShapeString(pre.shape()) + ", " +
                ShapeString(post.shape()) + " and target " +
                ShapeString(target.shape()) + " differ");
  }
  const Tensor e1 = Sub(pre, target);
  const Tensor e2 = Sub(post, target);
  const Tensor sum = Add(Add(SumAll(Abs(e1)), SumAll(Square(e1))),
                         Add(SumAll(Abs(e2)), SumAll(Square(e2))));
  return Scale(sum, 1.0 / static_cast<double>(target.numel()));
}

Tensor LossUtterance(const Tensor& seconds, std::size_t num_frames, double hop,
                     bool in_seconds) {
  const double n = static_cast<double>(seconds.numel());
  Tensor mismatch;
  if (in_seconds) {
    mismatch = AddScalar(Neg(SumAll(seconds)), static_cast<double>(num_frames) * hop);
  } else {
    mismatch = AddScalar(Neg(Scale(SumAll(seconds), 1.0 / hop)),
                         static_cast<double>(num_frames));
  }
  return Scale(Square(mismatch), 1.0 / n);
}

// ---- configuration --------------------------------------------------------------

TrainConfig MakeTrainConfig(const RunConfig& c) {
  TrainConfig t;
  t.regime = ParseRegime(c.Get("regime"));
  t.weights = LossWeights::ForRegime(t.regime);
  auto weight = [&](const char* key, double* out) {
    const std::string& v = c.Get(key);
    if (v == "auto") return;
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (v.empty() || *end != '\0' || !(x >= 0.0)) {
      throw Error(std::string("config key '") + key +
                  "' must be 'auto' or a non-negative number, got '" + v + "'");
    }
    *out = x;
  };
  weight("lambda_dur", &t.weights.duration);
  weight("lambda_u", &t.weights.utterance);
  weight("lambda_kl", &t.weights.kl);
  t.steps = static_cast<std::size_t>(c.GetInt("steps"));
  t.batch_size = static_cast<std::size_t>(c.GetInt("batch_size"));
  if (t.batch_size == 0) throw Error("batch_size must be positive");
  t.learning_rate = c.GetDouble("learning_rate");
  t.warmup_steps = static_cast<std::size_t>(c.GetInt("warmup_steps"));
  t.decay_start = static_cast<std::size_t>(c.GetInt("decay_start"));
  t.decay_every = static_cast<std::size_t>(c.GetInt("decay_every"));
  t.beta1 = c.GetDouble("adam_beta1");
  t.beta2 = c.GetDouble("adam_beta2");
  t.epsilon = c.GetDouble("adam_epsilon");
  t.l2 = c.GetDouble("l2");
  t.clip_norm = c.GetDouble("clip_norm");
  t.utterance_loss_seconds = c.Get("utterance_loss_units") == "seconds";
  t.scale_factor_gradient = c.GetBool("scale_factor_gradient");
  t.seed = static_cast<std::uint64_t>(c.GetInt("seed"));
  t.log_every = static_cast<std::size_t>(c.GetInt("log_every"));
  t.checkpoint_every = static_cast<std::size_t>(c.GetInt("checkpoint_every"));
  return t;
}

double LearningRate(const TrainConfig& c, std::size_t step) {
  double lr = c.learning_rate;
  if (c.warmup_steps > 0 && step < c.warmup_steps) {
    lr *= static_cast<double>(step + 1) / static_cast<double>(c.warmup_steps);
  }
  if (c.decay_every > 0 && step >= c.decay_start) {
    const std::size_t halvings = 1 + (step - c.decay_start) / c.decay_every;
    lr *= std::pow(0.5, static_cast<double>(halvings));
  }
  return lr;
}

// ---- batch loss ---------------------------------------------------------------------

void CheckRegime(const Dataset& data, Regime regime) {
  if (data.utterances.empty()) throw Error("dataset is empty");
  if (regime == Regime::kSupervised) {
    for (const auto& u : data.utterances) {
      if (!u.labeled()) {
        throw Error("labels required: supervised training needs duration labels "
                    "for every utterance (" + u.id + " has none)");
      }
    }
  }
}

namespace {

Tensor MeanOf(const std::vector<Tensor>& terms) {
  if (terms.empty()) return Tensor::Scalar(0.0);
  Tensor sum = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) sum = Add(sum, terms[i]);
  return Scale(sum, 1.0 / static_cast<double>(terms.size()));
}

}  // namespace

BatchLoss ComputeBatchLoss(const Model& model, const ParamStore& ps,
                           const Dataset& data,
                           std::span<const std::size_t> batch,
                           const TrainConfig& config, bool training, Rng rng) {
  const double hop = model.config().hop;
  const bool uses_labels =
      config.regime == Regime::kSupervised || config.regime == Regime::kSemi;
  std::vector<Tensor> spec, dur, utt, kl;
  BatchLoss out;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Utterance& u = data.utterances.at(batch[b]);
    const bool labeled = uses_labels && u.labeled();
    if (config.regime == Regime::kSupervised && !labeled) {
      throw Error("labels required: utterance " + u.id + " has no durations");
    }
    const Tensor target = Tensor::Matrix(u.num_frames, data.vocab.dim, u.frames);
    std::vector<int> target_frames;
    ForwardOptions options;
    options.training = training;
    options.scale_factor_gradient = config.scale_factor_gradient;
    if (labeled) {
      target_frames = TargetFrames(u, hop);
      options.source = DurationSource::kTarget;
    } else {
      options.source = DurationSource::kPredictedScaled;
    }
    ForwardResult f = Forward(model, ps, u.ids, u.speaker, target,
                              labeled ? &target_frames : nullptr, options,
                              rng.Split(b));
    spec.push_back(LossSpec(f.decoded.pre, f.decoded.post, target));
    if (labeled) {
      dur.push_back(LossDuration(f.seconds, *u.durations));
      ++out.report.labeled_utterances;
      out.report.labeled_tokens += u.ids.size();
    }
    utt.push_back(LossUtterance(f.seconds, u.num_frames, hop,
                                config.utterance_loss_seconds));
    if (f.posterior) kl.push_back(KlTerm(*f.posterior));
    out.encoder_outputs.push_back(std::move(f.encoder));
  }
  const Tensor l_spec = MeanOf(spec);
  const Tensor l_dur = MeanOf(dur);
  const Tensor l_utt = MeanOf(utt);
  const Tensor l_kl = MeanOf(kl);
  const LossWeights& w = config.weights;
  Tensor total = l_spec;
  if (w.duration != 0.0 && !dur.empty()) total = Add(total, Scale(l_dur, w.duration));
  if (w.utterance != 0.0) total = Add(total, Scale(l_utt, w.utterance));
  if (w.kl != 0.0 && !kl.empty()) total = Add(total, Scale(l_kl, w.kl));
  out.total = total;
  out.report.spec = l_spec.item();
  out.report.duration = l_dur.item();
  out.report.utterance = l_utt.item();
  out.report.kl = l_kl.item();
  out.report.total = total.item();
  out.report.utterances = batch.size();
  return out;
}

// ---- trainer ------------------------------------------------------------------------

Trainer::Trainer(const RunConfig& config)
    : config_(config), train_(MakeTrainConfig(config)) {
  ModelConfig mc = MakeModelConfig(config_);
  if ((train_.regime == Regime::kSemi || train_.regime == Regime::kUnsupervised) !=
      mc.use_fvae) {
    throw Error("model and regime disagree about the latent encoder");
  }
  model_ = std::make_unique<Model>(mc, DeriveSeed(train_.seed, 3));
  const ParamStore& ps = model_->params();
  adam_m_.resize(ps.size());
  adam_v_.resize(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!ps.entry(i).trainable) continue;
    adam_m_[i].assign(ps[i].numel(), 0.0);
    adam_v_[i].assign(ps[i].numel(), 0.0);
  }
}

std::vector<std::size_t> Trainer::BatchFor(const Dataset& data,
                                           std::size_t step) const {
  Rng rng = Rng(DeriveSeed(train_.seed, 4)).Split(step).Split(0);
  std::vector<std::size_t> batch(train_.batch_size);
  for (auto& b : batch) b = rng.Below(data.utterances.size());
  return batch;
}

void Trainer::SetTotalSteps(std::size_t steps) {
  config_.Set("steps", std::to_string(steps));
  train_.steps = steps;
}

LossReport Trainer::Step(const Dataset& data) {
  const std::vector<std::size_t> batch = BatchFor(data, step_);
  ParamStore& ps = model_->params();
  ps.ResetLeaves();
  Rng rng = Rng(DeriveSeed(train_.seed, 4)).Split(step_).Split(1);
  BatchLoss loss = ComputeBatchLoss(*model_, ps, data, batch, train_, true, rng);
  if (!std::isfinite(loss.report.total)) {
    throw DivergenceError("training diverged at step " + std::to_string(step_) +
                              ": non-finite loss",
                          loss.report, batch);
  }
  Backward(loss.total);

  // Gradients with L2 added, then global-norm clipping.
  std::vector<std::vector<double>> grads(ps.size());
  double norm2 = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!ps.entry(i).trainable) continue;
    const auto g = ps[i].grad();
    const auto w = ps[i].values();
    grads[i].resize(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
      grads[i][k] = (g.empty() ? 0.0 : g[k]) + train_.l2 * w[k];
      norm2 += grads[i][k] * grads[i][k];
    }
  }
  if (!std::isfinite(norm2)) {
    throw DivergenceError("training diverged at step " + std::to_string(step_) +
                              ": non-finite gradient",
                          loss.report, batch);
  }
  double clip = 1.0;
  const double norm = std::sqrt(norm2);
  if (train_.clip_norm > 0.0 && norm > train_.clip_norm) clip = train_.clip_norm / norm;

  const double lr = LearningRate(train_, step_);
  const double t = static_cast<double>(step_ + 1);
  const double c1 = 1.0 - std::pow(train_.beta1, t);
  const double c2 = 1.0 - std::pow(train_.beta2, t);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!ps.entry(i).trainable) continue;
    std::vector<double> w = ps[i].ToVector();
    auto& m = adam_m_[i];
    auto& v = adam_v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double g = grads[i][k] * clip;
      m[k] = train_.beta1 * m[k] + (1.0 - train_.beta1) * g;
      v[k] = train_.beta2 * v[k] + (1.0 - train_.beta2) * g * g;
      w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + train_.epsilon);
    }
    ps.Set(i, std::move(w));
  }
  for (const auto& enc : loss.encoder_outputs) {
    model_->encoder().UpdateNormStats(ps, enc, model_->config().norm_decay);
  }
  ++step_;
  return loss.report;
}

// ---- checkpoints --------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'N', 'A', 'T', 'T', 'S', 'C', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void Put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T Take(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("checkpoint truncated");
  return v;
}

void PutString(std::ostream& out, const std::string& s) {
  Put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string TakeString(std::istream& in) {
  const auto n = Take<std::uint64_t>(in);
  if (n > (1u << 30)) throw Error("checkpoint corrupt: string too long");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw Error("checkpoint truncated");
  return s;
}

void PutTensor(std::ostream& out, const std::string& name, const Shape& shape,
               std::span<const double> values) {
  PutString(out, name);
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) Put<std::uint64_t>(out, d);
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

}  // namespace

void Trainer::Save(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint " + path);
    out.write(kMagic, sizeof(kMagic));
    Put<std::uint32_t>(out, kVersion);
    Put<std::uint64_t>(out, step_);
    PutString(out, config_.Dump());
    const ParamStore& ps = model_->params();
    std::uint64_t count = ps.size();
    for (std::size_t i = 0; i < ps.size(); ++i) count += 2 * !adam_m_[i].empty();
    Put<std::uint64_t>(out, count);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      PutTensor(out, ps.entry(i).name, ps[i].shape(), ps[i].values());
    }
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (adam_m_[i].empty()) continue;
      PutTensor(out, "adam.m/" + ps.entry(i).name, ps[i].shape(), adam_m_[i]);
      PutTensor(out, "adam.v/" + ps.entry(i).name, ps[i].shape(), adam_v_[i]);
    }
    if (!out) throw Error("failed writing checkpoint " + path);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot move checkpoint into place: " + ec.message());
}

Trainer Trainer::Load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(path + " is not a checkpoint");
  }
  const auto version = Take<std::uint32_t>(in);
  if (version != kVersion) {
    throw Error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto step = Take<std::uint64_t>(in);
  RunConfig config;
  config.LoadText(TakeString(in), path);
  Trainer trainer(config);
  trainer.step_ = step;
  ParamStore& ps = trainer.model_->params();
  const auto count = Take<std::uint64_t>(in);
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::string name = TakeString(in);
    const auto rank = Take<std::uint32_t>(in);
    if (rank > 2) throw Error("checkpoint corrupt: rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) d = Take<std::uint64_t>(in);
    std::vector<double> values(NumElements(shape));
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!in) throw Error("checkpoint truncated");
    std::vector<double>* slot = nullptr;
    std::string param = name;
    if (name.rfind("adam.m/", 0) == 0) {
      param = name.substr(7);
      slot = &trainer.adam_m_[ps.Find(param)];
    } else if (name.rfind("adam.v/", 0) == 0) {
      param = name.substr(7);
      slot = &trainer.adam_v_[ps.Find(param)];
    }
    const std::size_t index = ps.Find(param);
    if (ps[index].shape() != shape) {
      throw Error("checkpoint tensor " + name + " has shape " + ShapeString(shape) +
                  ", model expects " + ShapeString(ps[index].shape()));
    }
    if (slot) {
      *slot = std::move(values);
    } else {
      ps.Set(index, std::move(values));
    }
  }
  return trainer;
}

// ---- training loop ------------------------------------------------------------------

std::string LossReportJson(std::size_t step, double learning_rate,
                           const LossReport& r) {
  json j{{"step", step},
         {"lr", learning_rate},
         {"loss", r.total},
         {"l_spec", r.spec},
         {"l_dur", r.duration},
         {"l_u", r.utterance},
         {"kl", r.kl},
         {"labeled_tokens", r.labeled_tokens}};
  return j.dump();
}

void RunTraining(Trainer& trainer, const Dataset& data,
                 const TrainRunOptions& options) {
  const TrainConfig& cfg = trainer.train_config();
  CheckRegime(data, cfg.regime);
  if (data.vocab.size != static_cast<int>(trainer.model().config().encoder.vocab_size) ||
      data.vocab.dim != static_cast<int>(trainer.model().config().frame_dim) ||
      data.vocab.num_speakers() !=
          static_cast<int>(trainer.model().config().encoder.num_speakers)) {
    throw Error("dataset does not match the model's vocabulary, frame width or "
                "speaker count");
  }
  std::ofstream metrics;
  if (!options.metrics_path.empty()) {
    metrics.open(options.metrics_path,
                 trainer.step() == 0 ? std::ios::trunc : std::ios::app);
    if (!metrics) throw Error("cannot write metrics log " + options.metrics_path);
  }
  while (trainer.step() < cfg.steps) {
    const std::size_t step = trainer.step();
    LossReport report;
    try {
      report = trainer.Step(data);
    } catch (const DivergenceError& e) {
      std::string dump = options.divergence_dump;
      if (dump.empty() && !options.metrics_path.empty()) {
        dump = options.metrics_path + ".divergence.json";
      }
      if (!dump.empty()) {
        json j = json::parse(LossReportJson(step, LearningRate(cfg, step), e.report()));
        json ids = json::array();
        for (auto b : e.batch()) ids.push_back(data.utterances[b].id);
        j["batch"] = ids;
        j["error"] = e.what();
        json norms = json::object();
        const ParamStore& ps = trainer.model().params();
        for (std::size_t i = 0; i < ps.size(); ++i) {
          double s = 0.0;
          for (double v : ps[i].values()) s += v * v;
          norms[ps.entry(i).name] = std::sqrt(s);
        }
        j["param_norms"] = norms;
        std::ofstream(dump) << j.dump(1) << '\n';
      }
      throw;
    }
    const std::size_t done = trainer.step();
    const bool log = (cfg.log_every > 0 && done % cfg.log_every == 0) || done == cfg.steps;
    if (log) {
      if (metrics.is_open()) {
        json j = json::parse(LossReportJson(done, LearningRate(cfg, step), report));
        if (options.validation) {
          j["val_mae"] = DurationMae(trainer.model(), *options.validation);
        }
        metrics << j.dump() << '\n';
        metrics.flush();
      }
      if (options.on_log) options.on_log(done, report);
    }
    if (!options.checkpoint_path.empty() && cfg.checkpoint_every > 0 &&
        done % cfg.checkpoint_every == 0) {
      trainer.Save(options.checkpoint_path);
    }
  }
  if (!options.checkpoint_path.empty()) trainer.Save(options.checkpoint_path);
}

// ---- inference ----------------------------------------------------------------------

namespace {

Tensor PriorProjection(const Model& model, std::size_t n, LatentMode mode, Rng rng) {
  const Fvae* fvae = model.fvae();
  if (!fvae) return {};
  return fvae->Project(model.params(),
                       InferLatents(n, fvae->config().latent_dim, mode, rng));
}

}  // namespace

std::vector<double> PredictDurations(const Model& model,
                                     std::span<const int> ids, int speaker) {
  NoGradGuard no_grad;
  const ParamStore& ps = model.params();
  const EncoderOutput enc = model.encoder()(ps, ids, speaker, false, Rng(0));
  const Tensor latents = PriorProjection(model, ids.size(), LatentMode::kZero, Rng(0));
  const Tensor d = model.duration()(ps, enc.encoded,
                                    latents.defined() ? &latents : nullptr,
                                    model.config().encoder.zoneout, false, Rng(0));
  std::vector<double> out = d.ToVector();
  for (auto& v : out) v = std::max(v, 0.0);
  return out;
}

Synthesis Synthesize(const Model& model, std::span<const int> ids, int speaker,
                     const SynthesisOptions& options) {
  NoGradGuard no_grad;
  const ModelConfig& cfg = model.config();
  const ParamStore& ps = model.params();
  const Rng rng(options.seed);
  Synthesis out;
  const EncoderOutput enc = model.encoder()(ps, ids, speaker, false, rng.Split(1));
  const Tensor latents =
      PriorProjection(model, ids.size(), options.latent_mode, rng.Split(2));
  const Tensor d = model.duration()(ps, enc.encoded,
                                    latents.defined() ? &latents : nullptr,
                                    cfg.encoder.zoneout, false, rng.Split(3));
  out.predicted_seconds = d.ToVector();
  for (auto& v : out.predicted_seconds) v = std::max(v, 0.0);
  out.seconds = PaceControl(out.predicted_seconds, options.pace, options.token_factors);
  out.frames = SecondsToFrames(out.seconds, cfg.hop);

  const long long cap = static_cast<long long>(std::floor(options.max_output_seconds / cfg.hop));
  long long total = std::accumulate(out.frames.begin(), out.frames.end(), 0LL);
  if (cap > 0 && total > cap) {
    out.truncated = true;
    for (auto it = out.frames.rbegin(); it != out.frames.rend() && total > cap; ++it) {
      const long long cut = std::min<long long>(*it, total - cap);
      *it -= static_cast<int>(cut);
      total -= cut;
    }
  }
  const std::size_t n = ids.size();
  const Tensor frames = Tensor::FromVector(
      {n}, std::vector<double>(out.frames.begin(), out.frames.end()));
  out.sigma = model.range()(ps, enc.encoded, frames, cfg.use_fvae,
                            cfg.encoder.zoneout, false, rng.Split(4));
  const UpsampleResult up = GaussianUpsample(enc.encoded, frames, out.sigma,
                                             static_cast<std::size_t>(total));
  out.centers = up.centers;
  out.weights = up.weights;
  const Tensor parts[] = {
      up.upsampled, PositionalEmbedding(out.frames, cfg.positional_dim, cfg.positional_base)};
  const bool dropout = options.prenet_dropout < 0 ? cfg.prenet_dropout_at_inference
                                                  : options.prenet_dropout != 0;
  out.decoded = model.decoder().Autoregressive(ps, ConcatCols(parts), dropout,
                                               false, rng.Split(5));
  return out;
}

double DurationMae(const Model& model, const Dataset& data,
                   const std::vector<int>* speakers) {
  double err = 0.0;
  std::size_t count = 0;
  for (const auto& u : data.utterances) {
    if (!u.labeled()) continue;
    if (speakers &&
        std::find(speakers->begin(), speakers->end(), u.speaker) == speakers->end()) {
      continue;
    }
    const auto d = PredictDurations(model, u.ids, u.speaker);
    for (std::size_t i = 0; i < d.size(); ++i) {
      err += std::abs(d[i] - (*u.durations)[i]);
      ++count;
    }
  }
  if (count == 0) throw Error("no labeled tokens to evaluate");
  return err / static_cast<double>(count);
}

double TokenDurationStd(const Dataset& data) {
  double s = 0.0, s2 = 0.0;
  std::size_t n = 0;
  for (const auto& u : data.utterances) {
    if (!u.labeled()) continue;
    for (double d : *u.durations) {
      s += d;
      s2 += d * d;
      ++n;
    }
  }
  if (n < 2) throw Error("need at least two labeled tokens");
  const double mean = s / static_cast<double>(n);
  return std::sqrt(std::max(0.0, s2 / static_cast<double>(n) - mean * mean));
}

}  // namespace natts

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

// Losses, optimisation, checkpoints and inference.

#ifndef NATTS_TRAINING_HPP_
#define NATTS_TRAINING_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "natts/config.hpp"
#include "natts/corpus.hpp"
#include "natts/model.hpp"

namespace natts {

enum class Regime { kSupervised, kSemi, kUnsupervised, kUnsupervisedNoFvae };

Regime ParseRegime(const std::string& name);
std::string RegimeName(Regime regime);

struct LossWeights {
  double duration = 0.0;
  double utterance = 0.0;
  double kl = 0.0;

  static LossWeights ForRegime(Regime regime);
};

struct LossReport {
  double spec = 0.0;
  double duration = 0.0;
  double utterance = 0.0;
  double kl = 0.0;
  double total = 0.0;
  std::size_t utterances = 0;
  std::size_t labeled_utterances = 0;
  std::size_t labeled_tokens = 0;
};

/// Mean squared error in seconds^2. Throws when the lengths differ.
Tensor LossDuration(const Tensor& predicted, std::span<const double> target);

/// (|y' - y*|_1 + |y' - y*|^2 + |y - y*|_1 + |y - y*|^2) / (T K).
Tensor LossSpec(const Tensor& pre, const Tensor& post, const Tensor& target);

/// (T - sum d)^2 / N with d converted to frames, or with T converted to
/// seconds when `in_seconds` is set.
Tensor LossUtterance(const Tensor& seconds, std::size_t num_frames, double hop,
                     bool in_seconds = false);

struct TrainConfig {
  Regime regime = Regime::kSupervised;
  LossWeights weights = LossWeights::ForRegime(Regime::kSupervised);
  std::size_t steps = 3000;
  std::size_t batch_size = 4;
  double learning_rate = 1e-3;
  std::size_t warmup_steps = 200;
  std::size_t decay_start = 1500;
  std::size_t decay_every = 500;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-6;
  double l2 = 1e-6;
  double clip_norm = 1.0;
  bool utterance_loss_seconds = false;
  bool scale_factor_gradient = true;
  std::uint64_t seed = 1;
  std::size_t log_every = 50;
  std::size_t checkpoint_every = 0;
};

TrainConfig MakeTrainConfig(const RunConfig& config);

/// Learning rate for the optimizer step with 0-based index `step`.
double LearningRate(const TrainConfig& config, std::size_t step);

struct BatchLoss {
  Tensor total;
  LossReport report;
  std::vector<EncoderOutput> encoder_outputs;
};

/// Loss over the utterances `batch` of `data`, averaged per term. Labeled
/// utterances contribute to the duration loss only in the supervised and
/// semi-supervised regimes.
BatchLoss ComputeBatchLoss(const Model& model, const ParamStore& ps,
                           const Dataset& data,
                           std::span<const std::size_t> batch,
                           const TrainConfig& config, bool training, Rng rng);

/// Throws if the dataset cannot be used with the configured regime.
void CheckRegime(const Dataset& data, Regime regime);

class Trainer {
 public:
  /// Fresh model from the configuration; the configuration must already
  /// describe the dataset (vocab_size, speakers, frame_dim, hop).
  explicit Trainer(const RunConfig& config);

  static Trainer Load(const std::string& checkpoint_path);
  void Save(const std::string& path) const;

  /// One optimizer step on a batch drawn from the step's own random stream.
  /// Throws DivergenceError on a non-finite loss or gradient.
  LossReport Step(const Dataset& data);

  std::size_t step() const { return step_; }
  /// Changes the total step count, e.g. to continue a finished run.
  void SetTotalSteps(std::size_t steps);
  const Model& model() const { return *model_; }
  Model& model() { return *model_; }
  const RunConfig& config() const { return config_; }
  const TrainConfig& train_config() const { return train_; }
  /// Batch indices used by the step with index `step`.
  std::vector<std::size_t> BatchFor(const Dataset& data, std::size_t step) const;

 private:
  RunConfig config_;
  TrainConfig train_;
  std::unique_ptr<Model> model_;
  std::vector<std::vector<double>> adam_m_, adam_v_;
  std::size_t step_ = 0;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, LossReport report,
                  std::vector<std::size_t> batch)
      : Error(what), report_(report), batch_(std::move(batch)) {}
  const LossReport& report() const { return report_; }
  const std::vector<std::size_t>& batch() const { return batch_; }

 private:
  LossReport report_;
  std::vector<std::size_t> batch_;
};

struct TrainRunOptions {
  std::string metrics_path;     // JSON lines; empty disables
  std::string checkpoint_path;  // empty disables
  /// Written when training diverges; defaults to metrics_path + ".divergence.json".
  std::string divergence_dump;
  const Dataset* validation = nullptr;  // duration MAE logged when set
  std::function<void(std::size_t step, const LossReport&)> on_log;
};

/// Runs the remaining steps up to the configured total.
void RunTraining(Trainer& trainer, const Dataset& data,
                 const TrainRunOptions& options);

std::string LossReportJson(std::size_t step, double learning_rate,
                           const LossReport& report);

// ---- inference -------------------------------------------------------------------

struct SynthesisOptions {
  double pace = 1.0;
  std::vector<double> token_factors;  // empty = all 1
  LatentMode latent_mode = LatentMode::kZero;
  std::uint64_t seed = 0;
  double max_output_seconds = 20.0;
  /// Overrides the model's prenet_dropout_at_inference when set.
  int prenet_dropout = -1;
};

struct Synthesis {
  DecoderOutput decoded;
  std::vector<double> predicted_seconds;  // clamped at zero
  std::vector<double> seconds;            // after pace control
  std::vector<int> frames;
  Tensor sigma;
  Tensor centers;
  Tensor weights;  // [T, N]
  bool truncated = false;
};

/// encode -> durations -> pace -> frames -> ranges -> upsampling ->
/// positional embedding -> autoregressive decoding. Throws when the plan has
/// no frames.
Synthesis Synthesize(const Model& model, std::span<const int> ids, int speaker,
                     const SynthesisOptions& options);

/// Predicted durations (seconds, zero latents, clamped at zero).
std::vector<double> PredictDurations(const Model& model,
                                     std::span<const int> ids, int speaker);

/// Mean absolute duration error in seconds over every token of the labeled
/// utterances, optionally restricted to some speakers.
double DurationMae(const Model& model, const Dataset& data,
                   const std::vector<int>* speakers = nullptr);

/// Standard deviation of all labeled token durations in the dataset.
double TokenDurationStd(const Dataset& data);

}  // namespace natts

#endif  // NATTS_TRAINING_HPP_

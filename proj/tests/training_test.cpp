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


#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "natts/training.hpp"
#include "natts/verify.hpp"

namespace natts {
namespace {

std::string TempPath(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("natts_" + name)).string();
}

TEST_CASE("duration loss is the mean squared error") {
  const Tensor d = Tensor::FromVector({2}, {0.1, 0.2});
  const double target[] = {0.1, 0.4};
  CHECK(LossDuration(d, target).item() == doctest::Approx(0.02).epsilon(1e-12));
  const double short_target[] = {0.1};
  CHECK_THROWS_AS(LossDuration(d, short_target), Error);
}

TEST_CASE("spectrogram loss sums L1 and L2 of both outputs") {
  const Tensor y = Tensor::Matrix(2, 2, {0.0, 1.0, 2.0, 3.0});
  const Tensor pre = AddScalar(y, 1.0);
  // Every element of pre is off by one: |1| + 1^2 = 2; post is exact.
  CHECK(LossSpec(pre, y, y).item() == doctest::Approx(2.0));
  CHECK_THROWS_AS(LossSpec(pre, Tensor::Zeros({1, 2}), y), Error);
}

TEST_CASE("utterance loss compares total frames") {
  const Tensor d = Tensor::FromVector({2}, {0.05, 0.05});
  // 8 predicted frames against 10: (10 - 8)^2 / 2 tokens.
  CHECK(LossUtterance(d, 10, 0.0125).item() == doctest::Approx(2.0));
  CHECK(LossUtterance(d, 10, 0.0125, true).item() ==
        doctest::Approx(0.025 * 0.025 / 2.0));
}

TEST_CASE("regime names round trip") {
  for (Regime r : {Regime::kSupervised, Regime::kSemi, Regime::kUnsupervised,
                   Regime::kUnsupervisedNoFvae}) {
    CHECK(ParseRegime(RegimeName(r)) == r);
  }
  CHECK_THROWS_AS(ParseRegime("weakly"), Error);
}

TEST_CASE("regime loss weights") {
  const auto sup = LossWeights::ForRegime(Regime::kSupervised);
  CHECK(sup.duration == 2.0);
  CHECK(sup.utterance == 0.0);
  const auto semi = LossWeights::ForRegime(Regime::kSemi);
  CHECK(semi.duration == 100.0);
  CHECK(semi.utterance == 100.0);
  CHECK(semi.kl == 1e-3);
  const auto unsup = LossWeights::ForRegime(Regime::kUnsupervised);
  CHECK(unsup.duration == 0.0);
  CHECK(unsup.utterance == 1.0);
  CHECK(unsup.kl == 1e-4);
  const auto plain = LossWeights::ForRegime(Regime::kUnsupervisedNoFvae);
  CHECK(plain.duration == 0.0);
  CHECK(plain.utterance == 1.0);
  CHECK(plain.kl == 0.0);
}

TEST_CASE("loss weight overrides") {
  RunConfig c;
  c.Set("regime", "semi");
  CHECK(MakeTrainConfig(c).weights.duration == 100.0);
  c.Set("lambda_dur", "3.5");
  CHECK(MakeTrainConfig(c).weights.duration == 3.5);
  c.Set("lambda_dur", "-1");
  CHECK_THROWS_AS(MakeTrainConfig(c), Error);
  c.Set("lambda_dur", "lots");
  CHECK_THROWS_AS(MakeTrainConfig(c), Error);
}

TEST_CASE("learning rate warmup and halving") {
  TrainConfig c;
  c.learning_rate = 1e-3;
  c.warmup_steps = 200;
  c.decay_start = 1500;
  c.decay_every = 500;
  CHECK(LearningRate(c, 0) == doctest::Approx(1e-3 / 200));
  CHECK(LearningRate(c, 99) == doctest::Approx(1e-3 * 100 / 200));
  CHECK(LearningRate(c, 199) == doctest::Approx(1e-3));
  CHECK(LearningRate(c, 1499) == doctest::Approx(1e-3));
  CHECK(LearningRate(c, 1500) == doctest::Approx(5e-4));
  CHECK(LearningRate(c, 1999) == doctest::Approx(5e-4));
  CHECK(LearningRate(c, 2000) == doctest::Approx(2.5e-4));
}

TEST_CASE("supervised training needs labels") {
  const Dataset data = BuildDataset(TinyConfig(Regime::kSemi));
  CHECK_NOTHROW(CheckRegime(data, Regime::kSemi));
  try {
    CheckRegime(data, Regime::kSupervised);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("labels required") != std::string::npos);
  }
}

TEST_CASE("unlabeled utterances add nothing to the duration loss") {
  const RunConfig cfg = TinyConfig(Regime::kSemi);
  const Dataset data = BuildDataset(cfg);
  const TrainConfig tc = MakeTrainConfig(cfg);
  Model model(MakeModelConfig(cfg), 3);
  std::vector<std::size_t> unlabeled, labeled;
  for (std::size_t i = 0; i < data.utterances.size(); ++i) {
    (data.utterances[i].labeled() ? labeled : unlabeled).push_back(i);
  }
  REQUIRE(unlabeled.size() >= 2);
  REQUIRE(!labeled.empty());
  const std::size_t only_unlabeled[] = {unlabeled[0], unlabeled[1]};
  const BatchLoss a =
      ComputeBatchLoss(model, model.params(), data, only_unlabeled, tc, false, Rng(1));
  CHECK(a.report.duration == 0.0);
  CHECK(a.report.labeled_utterances == 0);
  // Adding an unlabeled utterance to a labeled one leaves the duration term
  // untouched, because it is averaged over labeled utterances only.
  const std::size_t one[] = {labeled[0]};
  const std::size_t mixed[] = {labeled[0], unlabeled[0]};
  const BatchLoss b = ComputeBatchLoss(model, model.params(), data, one, tc, false, Rng(1));
  const BatchLoss c = ComputeBatchLoss(model, model.params(), data, mixed, tc, false, Rng(1));
  CHECK(b.report.duration == c.report.duration);
  CHECK(c.report.labeled_utterances == 1);
}

TEST_CASE("loss total decomposes exactly") {
  for (Regime r : {Regime::kSupervised, Regime::kSemi, Regime::kUnsupervised,
                   Regime::kUnsupervisedNoFvae}) {
    const RunConfig cfg = TinyConfig(r, 4);
    const Dataset data = BuildDataset(cfg);
    const TrainConfig tc = MakeTrainConfig(cfg);
    Model model(MakeModelConfig(cfg), 5);
    const std::size_t batch[] = {0, 1, 2, 3};
    const LossReport rep =
        ComputeBatchLoss(model, model.params(), data, batch, tc, true, Rng(2)).report;
    const double sum = rep.spec + tc.weights.duration * rep.duration +
                       tc.weights.utterance * rep.utterance + tc.weights.kl * rep.kl;
    CHECK(std::abs(rep.total - sum) <= 1e-12);
    CHECK((rep.kl > 0.0) == (r == Regime::kSemi || r == Regime::kUnsupervised));
  }
}

TEST_CASE("training is deterministic and resumes exactly") {
  RunConfig cfg = TinyConfig(Regime::kSemi, 6);
  cfg.Set("steps", "4");
  const Dataset data = BuildDataset(cfg);

  Trainer straight(cfg);
  std::vector<double> losses;
  for (int i = 0; i < 4; ++i) losses.push_back(straight.Step(data).total);

  Trainer again(cfg);
  for (int i = 0; i < 4; ++i) CHECK(again.Step(data).total == losses[i]);

  Trainer first(cfg);
  first.Step(data);
  first.Step(data);
  const std::string path = TempPath("resume.ckpt");
  first.Save(path);
  Trainer resumed = Trainer::Load(path);
  CHECK(resumed.step() == 2);
  CHECK(resumed.Step(data).total == losses[2]);
  CHECK(resumed.Step(data).total == losses[3]);
  const ParamStore& a = straight.model().params();
  const ParamStore& b = resumed.model().params();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto va = a[i].values();
    const auto vb = b[i].values();
    CHECK(std::equal(va.begin(), va.end(), vb.begin(), vb.end()));
  }
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint errors") {
  const std::string path = TempPath("bad.ckpt");
  std::ofstream(path) << "not a checkpoint";
  CHECK_THROWS_AS(Trainer::Load(path), Error);
  CHECK_THROWS_AS(Trainer::Load(TempPath("missing.ckpt")), Error);
  std::filesystem::remove(path);
}

TEST_CASE("run writes metrics every N steps") {
  RunConfig cfg = TinyConfig(Regime::kSupervised, 7);
  cfg.Set("steps", "4");
  cfg.Set("log_every", "2");
  const Dataset data = BuildDataset(cfg);
  Trainer trainer(cfg);
  TrainRunOptions opts;
  opts.metrics_path = TempPath("metrics.jsonl");
  opts.checkpoint_path = TempPath("run.ckpt");
  RunTraining(trainer, data, opts);
  std::ifstream in(opts.metrics_path);
  std::string line;
  std::vector<nlohmann::json> rows;
  while (std::getline(in, line)) rows.push_back(nlohmann::json::parse(line));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0]["step"] == 2);
  CHECK(rows[1]["step"] == 4);
  for (const char* key : {"loss", "l_spec", "l_dur", "l_u", "kl", "lr"}) {
    CHECK(rows[1].contains(key));
  }
  CHECK(Trainer::Load(opts.checkpoint_path).step() == 4);
  std::filesystem::remove(opts.metrics_path);
  std::filesystem::remove(opts.checkpoint_path);
}

TEST_CASE("synthesis honours pace, token factors and the output cap") {
  const RunConfig cfg = TinyConfig(Regime::kSupervised, 8);
  const Dataset data = BuildDataset(cfg);
  Trainer trainer(cfg);
  const Utterance& u = data.utterances[0];
  SynthesisOptions opts;
  const Synthesis base = Synthesize(trainer.model(), u.ids, u.speaker, opts);
  std::size_t total = 0;
  for (int f : base.frames) total += f;
  CHECK(base.decoded.post.rows() == total);
  CHECK(base.weights.rows() == total);
  CHECK(!base.truncated);

  opts.pace = 2.0;
  const Synthesis fast = Synthesize(trainer.model(), u.ids, u.speaker, opts);
  for (std::size_t i = 0; i < u.ids.size(); ++i) {
    CHECK(fast.seconds[i] == doctest::Approx(base.seconds[i] / 2.0));
  }

  opts.pace = 1.0;
  opts.token_factors = {1.0};
  CHECK_THROWS_AS(Synthesize(trainer.model(), u.ids, u.speaker, opts), Error);

  opts.token_factors.clear();
  opts.max_output_seconds = 0.05;
  const Synthesis capped = Synthesize(trainer.model(), u.ids, u.speaker, opts);
  CHECK(capped.truncated);
  CHECK(capped.decoded.post.rows() == 4);
}

TEST_CASE("duration statistics") {
  Dataset data;
  Utterance a;
  a.durations = std::vector<double>{0.1, 0.3};
  Utterance b;
  b.durations = std::vector<double>{0.2};
  Utterance c;  // unlabeled, ignored
  data.utterances = {a, b, c};
  // Pooled over the three labeled tokens: mean 0.2, variance 0.02 / 3.
  CHECK(TokenDurationStd(data) == doctest::Approx(std::sqrt(0.02 / 3.0)));
  Dataset none;
  none.utterances = {c};
  CHECK_THROWS_AS(TokenDurationStd(none), Error);
}

}  // namespace
}  // namespace natts

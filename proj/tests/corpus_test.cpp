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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <vector>

#include "doctest.h"
#include "natts/corpus.hpp"
#include "natts/duration_align.hpp"
#include "natts/tensor.hpp"

using namespace natts;

namespace {

int NearestTemplate(const VocabSpec& v, const double* frame) {
  int best = -1;
  double best_cos = -2.0;
  double norm = 0.0;
  for (int k = 0; k < v.dim; ++k) norm += frame[k] * frame[k];
  norm = std::sqrt(norm);
  for (int tok = 0; tok < v.size; ++tok) {
    double dot = 0.0;
    for (int k = 0; k < v.dim; ++k) dot += frame[k] * v.templates[tok][k];
    if (dot / norm > best_cos) {
      best_cos = dot / norm;
      best = tok;
    }
  }
  return best;
}

std::filesystem::path TempDir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("natts_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("vocabulary invariants") {
  const VocabSpec v = MakeVocab({}, 1);
  REQUIRE(v.size == 32);
  for (int a = 0; a < v.size; ++a) {
    double n = 0;
    for (double x : v.templates[a]) n += x * x;
    CHECK(n == doctest::Approx(1.0).epsilon(1e-12));
    for (int b = a + 1; b < v.size; ++b) {
      double c = 0;
      for (int k = 0; k < v.dim; ++k) c += v.templates[a][k] * v.templates[b][k];
      CHECK(c < 0.9);
    }
    CHECK(v.MeanSeconds(a) >= 0.05 - 1e-12);
    CHECK(v.MeanSeconds(a) <= 0.5);
  }
  VocabOptions tiny;
  tiny.size = 2;
  CHECK_THROWS_AS(MakeVocab(tiny, 1), Error);
}

TEST_CASE("single token renders an exact ramp") {
  const VocabSpec v = MakeVocab({}, 2);
  const std::vector<int> ids = {5};
  const auto frames = SecondsToFrames(std::vector<double>{0.05}, v.hop);
  REQUIRE(frames == std::vector<int>{4});
  const auto y = RenderFrames(v, ids, frames, 0.0, Rng(0));
  REQUIRE(y.size() == 4u * v.dim);
  for (int j = 0; j < 4; ++j) {
    for (int k = 0; k < v.dim; ++k) {
      CHECK(y[j * v.dim + k] == (0.5 + (j + 0.5) / 4.0) * v.templates[5][k]);
    }
  }
}

TEST_CASE("generation is deterministic and well formed") {
  const VocabSpec v = MakeVocab({}, 3);
  CorpusOptions opt;
  opt.num_utterances = 50;
  opt.noise_std = 0.05;
  const Dataset a = GenerateCorpus(v, opt, 7);
  const Dataset b = GenerateCorpus(v, opt, 7);
  REQUIRE(a.utterances.size() == 50);
  for (std::size_t i = 0; i < a.utterances.size(); ++i) {
    const auto& u = a.utterances[i];
    CHECK(u.ids == b.utterances[i].ids);
    CHECK(*u.durations == *b.utterances[i].durations);
    CHECK(u.frames == b.utterances[i].frames);
    CHECK(u.ids.back() == kEndOfSequenceId);
    CHECK(static_cast<int>(u.ids.size()) >= opt.min_tokens);
    CHECK(static_cast<int>(u.ids.size()) <= opt.max_tokens);
    for (double d : *u.durations) CHECK(d > 0.0);
    const auto f = TargetFrames(u, v.hop);
    CHECK(std::accumulate(f.begin(), f.end(), std::size_t{0}) == u.num_frames);
    for (const auto& [b0, e0] : u.words) {
      for (int t = b0; t < e0; ++t) {
        CHECK(u.ids[t] != kSilenceId);
        CHECK(u.ids[t] != kEndOfSequenceId);
        if (t > b0) CHECK(u.ids[t] != u.ids[t - 1]);
      }
    }
  }
  // Utterance i depends only on (seed, i).
  opt.num_utterances = 10;
  const Dataset prefix = GenerateCorpus(v, opt, 7);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(prefix.utterances[i].ids == a.utterances[i].ids);
  }
  opt.min_tokens = 1;
  CHECK_THROWS_AS(GenerateCorpus(v, opt, 7), Error);
}

TEST_CASE("mean frame count follows the duration model") {
  const VocabSpec v = MakeVocab({}, 4);
  CorpusOptions opt;
  opt.num_utterances = 1000;
  const Dataset ds = GenerateCorpus(v, opt, 11);
  double frames = 0.0, expected = 0.0;
  for (const auto& u : ds.utterances) {
    frames += static_cast<double>(u.num_frames);
    for (int tok : u.ids) {
      const double mean = std::exp(v.log_mean[tok] + 0.5 * v.log_std[tok] * v.log_std[tok]);
      expected += mean * v.speaker_rate[u.speaker] *
                  v.speaker_token_factor[u.speaker][tok] / v.hop;
    }
  }
  CHECK(std::abs(frames / expected - 1.0) < 0.05);
}

TEST_CASE("noise-free frames classify to their generating token") {
  const VocabSpec v = MakeVocab({}, 5);
  CorpusOptions opt;
  opt.num_utterances = 40;
  const Dataset ds = GenerateCorpus(v, opt, 13);
  for (const auto& u : ds.utterances) {
    const auto owner = RepeatAssignment(TargetFrames(u, v.hop));
    for (std::size_t t = 0; t < u.num_frames; ++t) {
      CHECK(NearestTemplate(v, &u.frames[t * v.dim]) == u.ids[owner[t]]);
    }
  }
  CHECK(ds.vocab.garbage_penalty == doctest::Approx(0.125).epsilon(0.2));
}

TEST_CASE("label withholding") {
  VocabOptions vo;
  vo.num_speakers = 10;
  const VocabSpec v = MakeVocab(vo, 6);
  CorpusOptions opt;
  opt.num_utterances = 200;
  const Dataset ds = GenerateCorpus(v, opt, 1);
  auto labeled = [](const Dataset& d) {
    int n = 0;
    for (const auto& u : d.utterances) n += u.labeled();
    return n;
  };
  CHECK(labeled(SplitLabels(ds, 1.0, 3)) == 200);
  CHECK(labeled(SplitLabels(ds, 0.0, 3)) == 0);
  const Dataset half = SplitLabels(ds, 0.5, 3);
  std::set<int> unlabeled;
  for (const auto& u : half.utterances) {
    if (!u.labeled()) unlabeled.insert(u.speaker);
  }
  CHECK(unlabeled.size() == 5);
  for (const auto& u : half.utterances) {
    CHECK(u.labeled() == (unlabeled.count(u.speaker) == 0));
  }
  CHECK(UnlabeledSpeakers(10, 0.5, 3) == std::vector<int>(unlabeled.begin(), unlabeled.end()));
  CHECK_THROWS_AS(SplitLabels(ds, 1.5, 3), Error);

  VocabOptions one;
  one.num_speakers = 1;
  opt.num_utterances = 20;
  const Dataset single = GenerateCorpus(MakeVocab(one, 6), opt, 1);
  CHECK(labeled(SplitLabels(single, 0.25, 3)) == 5);
}

TEST_CASE("dataset round trip") {
  const VocabSpec v = MakeVocab({}, 8);
  CorpusOptions opt;
  opt.num_utterances = 12;
  const Dataset ds = SplitLabels(GenerateCorpus(v, opt, 2), 0.5, 1);
  const auto dir = TempDir("roundtrip");
  SaveDataset(ds, dir.string());
  const Dataset back = LoadDataset(dir.string());
  REQUIRE(back.utterances.size() == ds.utterances.size());
  CHECK(back.vocab.templates == ds.vocab.templates);
  CHECK(back.vocab.garbage_penalty == ds.vocab.garbage_penalty);
  for (std::size_t i = 0; i < ds.utterances.size(); ++i) {
    const auto& a = ds.utterances[i];
    const auto& b = back.utterances[i];
    CHECK(a.id == b.id);
    CHECK(a.ids == b.ids);
    CHECK(a.words == b.words);
    CHECK(a.frames == b.frames);
    CHECK(a.durations == b.durations);
  }
  std::ifstream meta(dir / "meta.jsonl");
  std::string line;
  std::getline(meta, line);
  CHECK(line.find("\"noise_free\":true") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("reference words") {
  Utterance u;
  u.ids = {5, 9, 0, 3, 1};
  u.words = {{0, 2}, {3, 4}};
  CHECK(ReferenceWords(u) == std::vector<std::string>{"5-9", "3"});
}

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


#include <numeric>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "natts/duration_align.hpp"
#include "natts/eval.hpp"
#include "natts/verify.hpp"

namespace natts {
namespace {

Dataset Corpus(int utts = 20) {
  RunConfig c;
  c.Set("utts", std::to_string(utts));
  return BuildDataset(c);
}

std::vector<std::string> Words(std::initializer_list<const char*> w) {
  return {w.begin(), w.end()};
}

void CheckCoverage(const ForcedAlignment& a) {
  std::vector<std::pair<int, int>> spans = a.token_spans;
  spans.insert(spans.end(), a.unaligned.begin(), a.unaligned.end());
  std::sort(spans.begin(), spans.end());
  int at = 0;
  for (const auto& [b, e] : spans) {
    CHECK(b == at);
    CHECK(e > b);
    at = e;
  }
  CHECK(at == static_cast<int>(a.num_frames));
}

TEST_CASE("ground-truth frames align on the true boundaries") {
  const Dataset data = Corpus();
  for (const auto& u : data.utterances) {
    const ForcedAlignment a = ForcedAlign(u.frames, u.num_frames, u.ids, data.vocab);
    CHECK(a.feasible);
    CHECK(a.unaligned.empty());
    const std::vector<int> frames = TargetFrames(u, data.vocab.hop);
    int at = 0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      CHECK(a.token_spans[i] == std::make_pair(at, at + frames[i]));
      CHECK(a.aligned[i]);
      at += frames[i];
    }
    CheckCoverage(a);
  }
}

TEST_CASE("spliced noise becomes one unaligned span") {
  const Dataset data = Corpus();
  const VocabSpec& v = data.vocab;
  const Utterance base = FixtureUtterance(v, 1, 400, Rng(3));
  const std::vector<int> frames = TargetFrames(base, v.hop);
  const std::size_t at = std::accumulate(frames.begin(), frames.begin() + 10, 0);
  const Utterance spliced = InsertGarbage(base, at, 160, 0.5, v.dim, Rng(4));
  const ForcedAlignment a =
      ForcedAlign(spliced.frames, spliced.num_frames, spliced.ids, v);
  REQUIRE(a.unaligned.size() == 1);
  CHECK(a.unaligned[0] == std::make_pair(static_cast<int>(at), static_cast<int>(at) + 160));
  CHECK(a.UnalignedSeconds()[0].second - a.UnalignedSeconds()[0].first ==
        doctest::Approx(2.0));
  CHECK(a.feasible);
  CheckCoverage(a);
}

TEST_CASE("frames of another utterance are infeasible") {
  const Dataset data = Corpus();
  const Utterance& a = data.utterances[0];
  const Utterance& b = data.utterances[1];
  const ForcedAlignment al = ForcedAlign(b.frames, b.num_frames, a.ids, data.vocab);
  CHECK_FALSE(al.feasible);
  CheckCoverage(al);
  const double seconds[] = {al.seconds()};
  CHECK(LongUnalignedSeconds(al, 1.0) == doctest::Approx(seconds[0]));
}

TEST_CASE("more tokens than frames is infeasible, not an error") {
  const Dataset data = Corpus(1);
  const Utterance& u = data.utterances[0];
  const ForcedAlignment a = ForcedAlign(std::span(u.frames).first(data.vocab.dim), 1,
                                        u.ids, data.vocab);
  CHECK_FALSE(a.feasible);
  CHECK_THROWS_AS(ForcedAlign(u.frames, u.num_frames, std::vector<int>{}, data.vocab),
                  Error);
}

ForcedAlignment Synthetic(std::size_t frames, std::vector<std::pair<int, int>> gaps,
                          bool feasible = true) {
  ForcedAlignment a;
  a.hop = 0.01;
  a.num_frames = frames;
  a.unaligned = std::move(gaps);
  a.feasible = feasible;
  return a;
}

TEST_CASE("unaligned duration ratio") {
  // 0.9 s gap in 10 s: short, ignored.
  CHECK(Udr(std::vector{Synthetic(1000, {{100, 190}})}) == 0.0);
  // 2 s gap in 10 s.
  CHECK(Udr(std::vector{Synthetic(1000, {{100, 300}})}) == doctest::Approx(0.2));
  // Exactly 1 s does not count; the threshold is strict.
  CHECK(Udr(std::vector{Synthetic(1000, {{0, 100}})}) == 0.0);
  // Infeasible utterances count in full.
  CHECK(Udr(std::vector{Synthetic(500, {}, false)}) == 1.0);
  // Pooled versus per-utterance mean.
  const std::vector two = {Synthetic(1000, {{0, 200}}), Synthetic(3000, {})};
  CHECK(Udr(two) == doctest::Approx(2.0 / 40.0));
  CHECK(Udr(two, {.pooled = false}) == doctest::Approx(0.1));
  CHECK(Udr(two, {.threshold_seconds = 3.0}) == 0.0);
}

TEST_CASE("appending garbage raises corpus UDR by k / (total + k)") {
  Dataset data = Corpus(10);
  const EvalReport before = Evaluate(data);
  REQUIRE(before.udr == 0.0);
  double total = 0.0;
  for (const auto& u : data.utterances) total += u.num_frames * data.vocab.hop;
  Utterance& last = data.utterances.back();
  last = InsertGarbage(last, last.num_frames, 120, 0.5, data.vocab.dim, Rng(9));
  const double k = 120 * data.vocab.hop;
  const EvalReport after = Evaluate(data);
  CHECK(after.udr == doctest::Approx(k / (total + k)).epsilon(1e-12));
}

TEST_CASE("recognizer on ground truth and on a zeroed word") {
  const Dataset data = Corpus();
  for (const auto& u : data.utterances) {
    CHECK(Recognize(u.frames, u.num_frames, data.vocab) == ReferenceWords(u));
  }
  const Utterance& u = data.utterances[2];
  REQUIRE(u.words.size() >= 2);
  const Utterance z = ZeroWord(u, 1, data.vocab.hop, data.vocab.dim);
  std::vector<std::string> expected = ReferenceWords(u);
  expected.erase(expected.begin() + 1);
  CHECK(Recognize(z.frames, z.num_frames, data.vocab) == expected);
  const std::vector<double> blank(data.vocab.dim, 0.0);
  CHECK(Recognize(blank, 1, data.vocab).empty());
}

TEST_CASE("template accuracy") {
  const Dataset data = Corpus(5);
  const Utterance& u = data.utterances[0];
  const std::vector<int> owner = RepeatAssignment(TargetFrames(u, data.vocab.hop));
  CHECK(TemplateAccuracy(u.frames, u.num_frames, u.ids, owner, data.vocab) == 1.0);
  std::vector<int> shifted(owner.size(), 0);
  CHECK(TemplateAccuracy(u.frames, u.num_frames, u.ids, shifted, data.vocab) < 1.0);
  CHECK(NearestTemplate(std::vector<double>(data.vocab.dim, 0.0), data.vocab) == -1);
}

TEST_CASE("word error breakdown") {
  const auto abc = Words({"a", "b", "c"});
  WerBreakdown w = WerCounts(abc, Words({"a", "c"}));
  CHECK(w.deletions == 1);
  CHECK(w.insertions + w.substitutions == 0);
  CHECK(w.del() == doctest::Approx(1.0 / 3.0));

  w = WerCounts(abc, abc);
  CHECK(w.wer() == 0.0);

  w = WerCounts(Words({"a", "b"}), Words({"a", "x", "y"}));
  CHECK(w.substitutions == 1);
  CHECK(w.insertions == 1);
  CHECK(w.deletions == 0);
  CHECK(w.sub() == 0.5);
  CHECK(w.ins() == 0.5);

  CHECK_THROWS_AS(WerCounts({}, abc), Error);
}

TEST_CASE("word error identities on random pairs") {
  Rng rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::string> ref(1 + rng.Below(7)), hyp(rng.Below(8));
    for (auto& s : ref) s = std::to_string(rng.Below(3));
    for (auto& s : hyp) s = std::to_string(rng.Below(3));
    const WerBreakdown w = WerCounts(ref, hyp);
    CHECK(w.deletions + w.insertions + w.substitutions == w.distance);
    CHECK(w.wer() == w.del() + w.ins() + w.sub());
    CHECK(w.wer() >= w.del());
    // Lengths: ref - del + ins = hyp.
    CHECK(ref.size() - w.deletions + w.insertions == hyp.size());
  }
}

TEST_CASE("report formats") {
  const Dataset data = Corpus(3);
  const EvalReport r = Evaluate(data);
  const auto j = nlohmann::json::parse(r.ToJson());
  for (const char* key : {"udr", "wer", "del", "ins", "sub", "utterances", "rows"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["rows"].size() == 3);
  CHECK(j["rows"][0].contains("feasible"));
  const std::string csv = r.ToCsv();
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.rfind("id,seconds,", 0) == 0);
}

}  // namespace
}  // namespace natts

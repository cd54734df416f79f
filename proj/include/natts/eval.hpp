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


// Robustness metrics over synthesized spectrograms: a template forced aligner
// for the unaligned duration ratio (UDR) and a template recognizer for the
// word error rate and its deletion share (WDR).

#ifndef NATTS_EVAL_HPP_
#define NATTS_EVAL_HPP_

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "natts/corpus.hpp"

namespace natts {

struct AlignOptions {
  int max_token_frames = 160;
  /// Infeasible when the mean cost per token-aligned frame exceeds this
  /// times the garbage penalty.
  double feasibility_ratio = 0.5;
};

struct ForcedAlignment {
  std::vector<std::pair<int, int>> token_spans;   // [begin, end) frames
  std::vector<std::pair<int, int>> unaligned;     // garbage runs, frames
  std::vector<bool> aligned;  // token matched at no more than the penalty
  bool feasible = false;
  double cost = 0.0;
  double hop = 0.0125;
  std::size_t num_frames = 0;

  double seconds() const { return static_cast<double>(num_frames) * hop; }
  /// Unaligned spans as [start, end) seconds.
  std::vector<std::pair<double, double>> UnalignedSeconds() const;
};

/// Minimum-cost monotonic alignment of `tokens` to `frames` (T x dim,
/// row-major). Each token takes 1..max_token_frames frames matched against its
/// ramped template; garbage frames anywhere between tokens cost
/// vocab.garbage_penalty each.
ForcedAlignment ForcedAlign(std::span<const double> frames, std::size_t num_frames,
                            std::span<const int> tokens, const VocabSpec& vocab,
                            const AlignOptions& options = {});

struct UdrOptions {
  double threshold_seconds = 1.0;  // spans strictly longer than this count
  bool pooled = true;              // otherwise the mean of per-utterance ratios
};

/// Long unaligned seconds of one alignment; all of it when infeasible.
double LongUnalignedSeconds(const ForcedAlignment& alignment,
                            double threshold_seconds);
double Udr(std::span<const ForcedAlignment> alignments,
           const UdrOptions& options = {});

/// Index of the template with the highest cosine similarity, or -1 for a
/// frame whose norm is below `blank_norm`.
int NearestTemplate(std::span<const double> frame, const VocabSpec& vocab,
                    double blank_norm = 0.0);

/// Fraction of frames whose nearest template is `tokens[owner[t]]`.
double TemplateAccuracy(std::span<const double> frames, std::size_t num_frames,
                        std::span<const int> tokens, std::span<const int> owner,
                        const VocabSpec& vocab);

/// Frame-wise nearest template, blanks dropped, runs collapsed, words split at
/// silence and end-of-sequence tokens. Words are token ids joined with '-'.
std::vector<std::string> Recognize(std::span<const double> frames,
                                   std::size_t num_frames, const VocabSpec& vocab,
                                   double blank_norm = 0.25);

struct WerBreakdown {
  std::size_t ref_words = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t substitutions = 0;
  std::size_t distance = 0;  // edit distance from the dynamic program

  double del() const;
  double ins() const;
  double sub() const;
  double wer() const;
};

/// Levenshtein alignment with unit costs. Throws on an empty reference.
WerBreakdown WerCounts(std::span<const std::string> ref,
                       std::span<const std::string> hyp);

struct EvalOptions {
  AlignOptions align;
  UdrOptions udr;
  double blank_norm = 0.25;
};

struct EvalRow {
  std::string id;
  double seconds = 0.0;
  double long_unaligned_seconds = 0.0;
  double unaligned_seconds = 0.0;
  bool feasible = false;
  WerBreakdown words;
  std::vector<std::string> hypothesis;
  std::vector<std::string> reference;

  double udr() const;
};

struct EvalReport {
  double udr = 0.0;
  double wer = 0.0;
  double del = 0.0;
  double ins = 0.0;
  double sub = 0.0;
  std::size_t utterances = 0;
  std::size_t infeasible = 0;
  std::vector<EvalRow> rows;

  std::string ToJson() const;
  std::string ToCsv() const;
};

EvalRow EvaluateUtterance(const Utterance& utt, const VocabSpec& vocab,
                          const EvalOptions& options,
                          ForcedAlignment* alignment = nullptr);

/// Treats every utterance's frames as a synthesized output for its tokens and
/// reference words. Rates are pooled over the corpus.
EvalReport Evaluate(const Dataset& outputs, const EvalOptions& options = {});

// ---- injection fixtures ---------------------------------------------------------

/// Noise-free labeled utterance of exactly `num_frames` frames.
Utterance FixtureUtterance(const VocabSpec& vocab, int speaker,
                           std::size_t num_frames, Rng rng);

/// Inserts `count` frames of N(0, std^2) noise before frame `at`. Duration
/// labels are dropped.
Utterance InsertGarbage(const Utterance& utt, std::size_t at, std::size_t count,
                        double std, std::size_t dim, Rng rng);

/// Zeroes the frames of word `word` of a labeled utterance.
Utterance ZeroWord(const Utterance& utt, std::size_t word, double hop,
                   std::size_t dim);

}  // namespace natts

#endif  // NATTS_EVAL_HPP_

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

// Synthetic corpus with exactly known token durations.
//
// Every token owns a unit-norm template vector. An utterance is rendered by
// emitting, for each token, frames_i copies of its template scaled by a
// linear ramp over the token's frames, plus optional white noise. Token
// durations are log-normal per token, modulated by a per-speaker rate and a
// per-(speaker, token) factor.
//
// On-disk layout of a corpus directory (all binary data little-endian):
//   vocab.json     vocabulary, templates, duration model, calibration
//   meta.jsonl     one JSON object per utterance: id, N, T, speaker, words,
//                  labeled, noise_std
//   ids.u32        concatenated token ids (N per utterance)
//   durations.f64  concatenated target durations in seconds, present for
//                  labeled utterances only (N per labeled utterance)
//   frames.f64     concatenated T x K frame blocks, row-major

#ifndef NATTS_CORPUS_HPP_
#define NATTS_CORPUS_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "natts/rng.hpp"

namespace natts {

inline constexpr int kSilenceId = 0;
inline constexpr int kEndOfSequenceId = 1;

struct VocabOptions {
  int size = 32;
  int dim = 16;
  int num_speakers = 4;
  double hop = 0.0125;
  double min_mean_seconds = 0.05;
  double max_mean_seconds = 0.2;
  double log_std = 0.15;
  double speaker_rate_spread = 0.15;   // log-uniform in [-s, s]
  double speaker_token_spread = 0.25;  // std of per-(speaker, token) log factor
  double max_template_cosine = 0.9;
};

struct VocabSpec {
  int size = 0;
  int dim = 0;
  double hop = 0.0125;
  std::vector<std::vector<double>> templates;  // [size][dim], unit norm
  std::vector<double> log_mean;                // per token, log seconds
  std::vector<double> log_std;
  std::vector<double> speaker_rate;                       // [speakers]
  std::vector<std::vector<double>> speaker_token_factor;  // [speakers][size]
  /// Per-frame cost of an unaligned (garbage) frame in the forced aligner.
  double garbage_penalty = 0.0;

  int num_speakers() const { return static_cast<int>(speaker_rate.size()); }
  /// Mean of the base log-normal duration of a token, in seconds.
  double MeanSeconds(int token) const;
};

VocabSpec MakeVocab(const VocabOptions& options, std::uint64_t seed);

/// Ramp gain of frame j (0-based) of a token rendered over n frames.
inline double RampGain(std::size_t j, std::size_t n) {
  return 0.5 + (static_cast<double>(j) + 0.5) / static_cast<double>(n);
}

struct Utterance {
  std::string id;
  int speaker = 0;
  std::vector<int> ids;
  /// Target durations in seconds; absent when labels are withheld.
  std::optional<std::vector<double>> durations;
  /// Token ranges [begin, end) of each word (silence and end-of-sequence
  /// tokens belong to no word).
  std::vector<std::pair<int, int>> words;
  std::size_t num_frames = 0;
  std::vector<double> frames;  // num_frames x dim, row-major
  double noise_std = 0.0;

  std::size_t size() const { return ids.size(); }
  bool labeled() const { return durations.has_value(); }
};

struct Dataset {
  VocabSpec vocab;
  std::vector<Utterance> utterances;
};

struct CorpusOptions {
  int num_utterances = 100;
  int min_tokens = 4;
  int max_tokens = 12;
  double noise_std = 0.0;
  int max_word_tokens = 4;
};

/// Frames for a token sequence with given per-token frame counts.
std::vector<double> RenderFrames(const VocabSpec& vocab,
                                 std::span<const int> ids,
                                 std::span<const int> frames, double noise_std,
                                 Rng rng);

/// Deterministic corpus; utterance i depends only on (seed, i).
Dataset GenerateCorpus(const VocabSpec& vocab, const CorpusOptions& options,
                       std::uint64_t seed);

/// Token ids and word ranges for one utterance of exactly `num_tokens` tokens.
void SampleTokens(const VocabSpec& vocab, int num_tokens, int max_word_tokens,
                  Rng& rng, std::vector<int>* ids,
                  std::vector<std::pair<int, int>>* words);

/// Per-token durations (seconds) for a speaker.
std::vector<double> SampleDurations(const VocabSpec& vocab,
                                    std::span<const int> ids, int speaker,
                                    Rng& rng);

/// Withholds labels from a deterministic (1 - labeled_fraction) share of the
/// data: whole speakers when the corpus has several, otherwise utterances.
Dataset SplitLabels(Dataset dataset, double labeled_fraction,
                    std::uint64_t seed);

/// Speakers whose labels SplitLabels withholds.
std::vector<int> UnlabeledSpeakers(int num_speakers, double labeled_fraction,
                                   std::uint64_t seed);

/// 2 x median over all frames of the squared distance to the bare template
/// of the generating token.
double CalibrateGarbagePenalty(const Dataset& dataset);

void SaveDataset(const Dataset& dataset, const std::string& dir);
Dataset LoadDataset(const std::string& dir);

/// Word strings ("5-9-3") of the reference transcript.
std::vector<std::string> ReferenceWords(const Utterance& utt);
std::string WordString(std::span<const int> token_ids);

/// Ground-truth frame counts of a labeled utterance.
std::vector<int> TargetFrames(const Utterance& utt, double hop);

}  // namespace natts

#endif  // NATTS_CORPUS_HPP_

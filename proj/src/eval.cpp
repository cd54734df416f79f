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

#include "natts/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"
#include "natts/duration_align.hpp"
#include "natts/tensor.hpp"

namespace natts {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Prefix sums that give the squared distance between frames [s, s + n) and
// a token's ramped template in O(1).
struct TemplateSums {
  std::vector<double> dot;       // sum of y_t . tau
  std::vector<double> dot_time;  // sum of t * (y_t . tau)
};

// sum over j < n of RampGain(j, n)^2
double RampEnergy(int n) {
  const double x = static_cast<double>(n);
  return 13.0 * x / 12.0 - 1.0 / (12.0 * x);
}

}  // namespace

std::vector<std::pair<double, double>> ForcedAlignment::UnalignedSeconds() const {
  std::vector<std::pair<double, double>> out;
  for (const auto& [b, e] : unaligned) out.emplace_back(b * hop, e * hop);
  return out;
}

ForcedAlignment ForcedAlign(std::span<const double> frames, std::size_t num_frames,
                            std::span<const int> tokens, const VocabSpec& vocab,
                            const AlignOptions& options) {
  if (tokens.empty()) throw Error("forced_align: empty token sequence");
  const std::size_t K = static_cast<std::size_t>(vocab.dim);
  if (frames.size() != num_frames * K) {
    throw Error("forced_align: " + std::to_string(frames.size()) +
                " values for " + std::to_string(num_frames) + " frames of width " +
                std::to_string(K));
  }
  const int T = static_cast<int>(num_frames);
  const int N = static_cast<int>(tokens.size());
  const int max_len = std::max(1, options.max_token_frames);
  const double penalty = vocab.garbage_penalty;

  ForcedAlignment out;
  out.hop = vocab.hop;
  out.num_frames = num_frames;

  std::vector<double> energy(T + 1, 0.0);
  for (int t = 0; t < T; ++t) {
    double e = 0.0;
    for (std::size_t k = 0; k < K; ++k) e += frames[t * K + k] * frames[t * K + k];
    energy[t + 1] = energy[t] + e;
  }
  std::map<int, TemplateSums> sums;
  for (int id : tokens) {
    if (id < 0 || id >= vocab.size) {
      throw Error("forced_align: token id " + std::to_string(id) + " outside vocabulary");
    }
    if (sums.count(id)) continue;
    TemplateSums& s = sums[id];
    s.dot.assign(T + 1, 0.0);
    s.dot_time.assign(T + 1, 0.0);
    const auto& tau = vocab.templates[id];
    for (int t = 0; t < T; ++t) {
      double p = 0.0;
      for (std::size_t k = 0; k < K; ++k) p += frames[t * K + k] * tau[k];
      s.dot[t + 1] = s.dot[t] + p;
      s.dot_time[t + 1] = s.dot_time[t] + t * p;
    }
  }
  auto segment_cost = [&](int id, int start, int n) {
    const TemplateSums& s = sums.at(id);
    const double dot = s.dot[start + n] - s.dot[start];
    const double dot_time = s.dot_time[start + n] - s.dot_time[start];
    const double ramp_dot = 0.5 * dot + (dot_time - (start - 0.5) * dot) / n;
    return (energy[start + n] - energy[start]) - 2.0 * ramp_dot + RampEnergy(n);
  };

  // best[i][t]: first i tokens placed within frames [0, t), trailing garbage
  // allowed. from_garbage marks cells whose last frame is garbage; length
  // holds the token span length otherwise.
  const std::size_t W = static_cast<std::size_t>(T) + 1;
  std::vector<double> best((N + 1) * W, kInf);
  std::vector<int> length((N + 1) * W, 0);
  std::vector<char> from_garbage((N + 1) * W, 0);
  for (int t = 0; t <= T; ++t) {
    best[t] = t * penalty;
    from_garbage[t] = t > 0;
  }
  for (int i = 1; i <= N; ++i) {
    const int id = tokens[i - 1];
    for (int t = 1; t <= T; ++t) {
      double cell = kInf;
      int cell_len = 0;
      for (int n = 1; n <= std::min(max_len, t); ++n) {
        const double prev = best[(i - 1) * W + t - n];
        if (prev == kInf) continue;
        const double c = prev + segment_cost(id, t - n, n);
        if (c < cell) {
          cell = c;
          cell_len = n;
        }
      }
      const double garbage = best[i * W + t - 1] + penalty;
      if (garbage < cell) {
        best[i * W + t] = garbage;
        from_garbage[i * W + t] = 1;
      } else {
        best[i * W + t] = cell;
        length[i * W + t] = cell_len;
      }
    }
  }

  out.cost = best[N * W + T];
  if (out.cost == kInf) {
    out.feasible = false;
    if (T > 0) out.unaligned.emplace_back(0, T);
    return out;
  }
  std::vector<char> garbage_frame(T, 0);
  out.token_spans.assign(N, {0, 0});
  out.aligned.assign(N, false);
  double token_cost = 0.0;
  int token_frames = 0;
  int i = N, t = T;
  while (t > 0) {
    if (from_garbage[i * W + t]) {
      garbage_frame[t - 1] = 1;
      --t;
      continue;
    }
    const int n = length[i * W + t];
    const double c = segment_cost(tokens[i - 1], t - n, n);
    out.token_spans[i - 1] = {t - n, t};
    out.aligned[i - 1] = c <= penalty * static_cast<double>(n);
    token_cost += c;
    token_frames += n;
    t -= n;
    --i;
  }
  for (int s = 0; s < T;) {
    if (!garbage_frame[s]) {
      ++s;
      continue;
    }
    int e = s;
    while (e < T && garbage_frame[e]) ++e;
    out.unaligned.emplace_back(s, e);
    s = e;
  }
  out.feasible = token_cost <= options.feasibility_ratio * penalty * token_frames;
  return out;
}

double LongUnalignedSeconds(const ForcedAlignment& alignment,
                            double threshold_seconds) {
  if (!alignment.feasible) return alignment.seconds();
  double total = 0.0;
  for (const auto& [b, e] : alignment.UnalignedSeconds()) {
    if (e - b > threshold_seconds) total += e - b;
  }
  return total;
}

double Udr(std::span<const ForcedAlignment> alignments, const UdrOptions& options) {
  double unaligned = 0.0, total = 0.0, ratio_sum = 0.0;
  std::size_t count = 0;
  for (const auto& a : alignments) {
    if (a.num_frames == 0) continue;
    const double u = LongUnalignedSeconds(a, options.threshold_seconds);
    unaligned += u;
    total += a.seconds();
    ratio_sum += u / a.seconds();
    ++count;
  }
  if (count == 0) return 0.0;
  return options.pooled ? unaligned / total : ratio_sum / static_cast<double>(count);
}

// ---- recognition ----------------------------------------------------------------

int NearestTemplate(std::span<const double> frame, const VocabSpec& vocab,
                    double blank_norm) {
  double norm2 = 0.0;
  for (double v : frame) norm2 += v * v;
  const double norm = std::sqrt(norm2);
  if (norm == 0.0 || norm < blank_norm) return -1;
  int best = -1;
  double best_cos = -kInf;
  for (int id = 0; id < vocab.size; ++id) {
    double dot = 0.0;
    for (std::size_t k = 0; k < frame.size(); ++k) dot += frame[k] * vocab.templates[id][k];
    if (dot > best_cos) {
      best_cos = dot;
      best = id;
    }
  }
  return best;
}

double TemplateAccuracy(std::span<const double> frames, std::size_t num_frames,
                        std::span<const int> tokens, std::span<const int> owner,
                        const VocabSpec& vocab) {
  if (owner.size() != num_frames) {
    throw Error("template accuracy: " + std::to_string(owner.size()) +
                " owners for " + std::to_string(num_frames) + " frames");
  }
  if (num_frames == 0) return 0.0;
  const std::size_t K = static_cast<std::size_t>(vocab.dim);
  std::size_t hits = 0;
  for (std::size_t t = 0; t < num_frames; ++t) {
    hits += NearestTemplate(frames.subspan(t * K, K), vocab) == tokens[owner[t]];
  }
  return static_cast<double>(hits) / static_cast<double>(num_frames);
}

std::vector<std::string> Recognize(std::span<const double> frames,
                                   std::size_t num_frames, const VocabSpec& vocab,
                                   double blank_norm) {
  const std::size_t K = static_cast<std::size_t>(vocab.dim);
  std::vector<int> collapsed;
  for (std::size_t t = 0; t < num_frames; ++t) {
    const int id = NearestTemplate(frames.subspan(t * K, K), vocab, blank_norm);
    if (id < 0) continue;
    if (collapsed.empty() || collapsed.back() != id) collapsed.push_back(id);
  }
  std::vector<std::string> words;
  std::vector<int> word;
  for (int id : collapsed) {
    if (id == kSilenceId || id == kEndOfSequenceId) {
      if (!word.empty()) words.push_back(WordString(word));
      word.clear();
    } else {
      word.push_back(id);
    }
  }
  if (!word.empty()) words.push_back(WordString(word));
  return words;
}

double WerBreakdown::del() const {
  return static_cast<double>(deletions) / static_cast<double>(ref_words);
}
double WerBreakdown::ins() const {
  return static_cast<double>(insertions) / static_cast<double>(ref_words);
}
double WerBreakdown::sub() const {
  return static_cast<double>(substitutions) / static_cast<double>(ref_words);
}
double WerBreakdown::wer() const { return del() + ins() + sub(); }

WerBreakdown WerCounts(std::span<const std::string> ref,
                       std::span<const std::string> hyp) {
  if (ref.empty()) throw Error("word error rate: empty reference");
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& {
    return d[i * (m + 1) + j];
  };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      at(i, j) = std::min({at(i - 1, j - 1) + (ref[i - 1] != hyp[j - 1]),
                           at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  WerBreakdown w;
  w.ref_words = n;
  w.distance = at(n, m);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        at(i, j) == at(i - 1, j - 1) + (ref[i - 1] != hyp[j - 1])) {
      w.substitutions += ref[i - 1] != hyp[j - 1];
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++w.deletions;
      --i;
    } else {
      ++w.insertions;
      --j;
    }
  }
  return w;
}

// ---- reports ----------------------------------------------------------------------

double EvalRow::udr() const {
  return seconds > 0.0 ? long_unaligned_seconds / seconds : 0.0;
}

EvalRow EvaluateUtterance(const Utterance& utt, const VocabSpec& vocab,
                          const EvalOptions& options, ForcedAlignment* alignment) {
  EvalRow row;
  row.id = utt.id;
  ForcedAlignment a =
      ForcedAlign(utt.frames, utt.num_frames, utt.ids, vocab, options.align);
  row.seconds = a.seconds();
  row.feasible = a.feasible;
  row.long_unaligned_seconds =
      LongUnalignedSeconds(a, options.udr.threshold_seconds);
  for (const auto& [b, e] : a.unaligned) row.unaligned_seconds += (e - b) * a.hop;
  row.reference = ReferenceWords(utt);
  row.hypothesis = Recognize(utt.frames, utt.num_frames, vocab, options.blank_norm);
  if (!row.reference.empty()) row.words = WerCounts(row.reference, row.hypothesis);
  if (alignment) *alignment = std::move(a);
  return row;
}

EvalReport Evaluate(const Dataset& outputs, const EvalOptions& options) {
  EvalReport report;
  double unaligned = 0.0, total = 0.0, ratio_sum = 0.0;
  std::size_t ref = 0, del = 0, ins = 0, sub = 0;
  for (const auto& utt : outputs.utterances) {
    EvalRow row = EvaluateUtterance(utt, outputs.vocab, options);
    unaligned += row.long_unaligned_seconds;
    total += row.seconds;
    ratio_sum += row.udr();
    ref += row.words.ref_words;
    del += row.words.deletions;
    ins += row.words.insertions;
    sub += row.words.substitutions;
    report.infeasible += !row.feasible;
    report.rows.push_back(std::move(row));
  }
  report.utterances = report.rows.size();
  if (report.utterances > 0) {
    report.udr = options.udr.pooled
                     ? (total > 0.0 ? unaligned / total : 0.0)
                     : ratio_sum / static_cast<double>(report.utterances);
  }
  if (ref > 0) {
    const double r = static_cast<double>(ref);
    report.del = static_cast<double>(del) / r;
    report.ins = static_cast<double>(ins) / r;
    report.sub = static_cast<double>(sub) / r;
    report.wer = report.del + report.ins + report.sub;
  }
  return report;
}

namespace {

std::string Join(const std::vector<std::string>& words) {
  std::string s;
  for (std::size_t i = 0; i < words.size(); ++i) s += (i ? " " : "") + words[i];
  return s;
}

}  // namespace

std::string EvalReport::ToJson() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"id", r.id},
                         {"seconds", r.seconds},
                         {"unaligned_seconds", r.unaligned_seconds},
                         {"long_unaligned_seconds", r.long_unaligned_seconds},
                         {"udr", r.udr()},
                         {"feasible", r.feasible},
                         {"ref_words", r.words.ref_words},
                         {"del", r.words.deletions},
                         {"ins", r.words.insertions},
                         {"sub", r.words.substitutions},
                         {"reference", Join(r.reference)},
                         {"hypothesis", Join(r.hypothesis)}});
  }
  nlohmann::json j{{"udr", udr},   {"wer", wer},
                   {"del", del},   {"ins", ins},
                   {"sub", sub},   {"wdr", del},
                   {"utterances", utterances},
                   {"infeasible", infeasible}, {"rows", rows_json}};
  return j.dump(2);
}

std::string EvalReport::ToCsv() const {
  std::ostringstream os;
  os << "id,seconds,unaligned_seconds,long_unaligned_seconds,udr,feasible,"
        "ref_words,del,ins,sub\n";
  for (const auto& r : rows) {
    os << r.id << ',' << r.seconds << ',' << r.unaligned_seconds << ','
       << r.long_unaligned_seconds << ',' << r.udr() << ',' << (r.feasible ? 1 : 0)
       << ',' << r.words.ref_words << ',' << r.words.deletions << ','
       << r.words.insertions << ',' << r.words.substitutions << '\n';
  }
  return os.str();
}

// ---- injection fixtures ---------------------------------------------------------

Utterance FixtureUtterance(const VocabSpec& vocab, int speaker,
                           std::size_t num_frames, Rng rng) {
  const double mean_frames = vocab.MeanSeconds(2) / vocab.hop;
  const int tokens = std::max(
      2, static_cast<int>(static_cast<double>(num_frames) / std::max(1.0, mean_frames)));
  Utterance utt;
  utt.id = "fixture";
  utt.speaker = speaker;
  Rng token_rng = rng.Split(1);
  SampleTokens(vocab, tokens, 4, token_rng, &utt.ids, &utt.words);
  Rng duration_rng = rng.Split(2);
  std::vector<double> seconds = SampleDurations(vocab, utt.ids, speaker, duration_rng);
  double total = 0.0;
  for (double d : seconds) total += d;
  const double scale = static_cast<double>(num_frames) * vocab.hop / total;
  for (auto& d : seconds) d *= scale;
  std::vector<int> frames =
      SecondsToFrames(seconds, vocab.hop, static_cast<int>(num_frames));
  for (int f : frames) {
    if (f <= 0) throw Error("fixture utterance: token without frames");
  }
  for (std::size_t i = 0; i < frames.size(); ++i) seconds[i] = frames[i] * vocab.hop;
  utt.durations = seconds;
  utt.num_frames = num_frames;
  utt.frames = RenderFrames(vocab, utt.ids, frames, 0.0, rng.Split(3));
  return utt;
}

Utterance InsertGarbage(const Utterance& utt, std::size_t at, std::size_t count,
                        double std, std::size_t dim, Rng rng) {
  if (at > utt.num_frames) throw Error("insert_garbage: position past the end");
  Utterance out = utt;
  out.durations.reset();
  std::vector<double> noise(count * dim);
  for (auto& v : noise) v = std * rng.Normal();
  out.frames.insert(out.frames.begin() + static_cast<std::ptrdiff_t>(at * dim),
                    noise.begin(), noise.end());
  out.num_frames += count;
  return out;
}

Utterance ZeroWord(const Utterance& utt, std::size_t word, double hop,
                   std::size_t dim) {
  if (!utt.labeled()) throw Error("zero_word: utterance has no durations");
  if (word >= utt.words.size()) throw Error("zero_word: no such word");
  const std::vector<int> frames = TargetFrames(utt, hop);
  std::size_t begin = 0;
  for (int i = 0; i < utt.words[word].first; ++i) begin += frames[i];
  std::size_t end = begin;
  for (int i = utt.words[word].first; i < utt.words[word].second; ++i) end += frames[i];
  Utterance out = utt;
  std::fill(out.frames.begin() + static_cast<std::ptrdiff_t>(begin * dim),
            out.frames.begin() + static_cast<std::ptrdiff_t>(end * dim), 0.0);
  return out;
}

}  // namespace natts

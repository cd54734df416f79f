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

#include "natts/corpus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "natts/duration_align.hpp"
#include "natts/tensor.hpp"

namespace natts {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "corpus files are written in native order; big-endian hosts "
              "need byte swapping");

double VocabSpec::MeanSeconds(int token) const {
  return std::exp(log_mean[token] + 0.5 * log_std[token] * log_std[token]);
}

VocabSpec MakeVocab(const VocabOptions& options, std::uint64_t seed) {
  if (options.size < 3) {
    throw Error("vocabulary needs at least one token besides silence and "
                "end-of-sequence, got size " + std::to_string(options.size));
  }
  if (options.dim < 2) throw Error("template dimension must be at least 2");
  if (options.num_speakers < 1) throw Error("need at least one speaker");
  if (!(options.min_mean_seconds >= 0.05) ||
      !(options.max_mean_seconds <= 0.5) ||
      options.min_mean_seconds > options.max_mean_seconds) {
    throw Error("token mean durations must lie within [0.05, 0.5] s");
  }
  Rng rng(seed);
  VocabSpec v;
  v.size = options.size;
  v.dim = options.dim;
  v.hop = options.hop;

  Rng trng = rng.Split(1);
  const int kMaxAttempts = 10000;
  while (static_cast<int>(v.templates.size()) < options.size) {
    int attempts = 0;
    std::vector<double> t(options.dim);
    bool ok = false;
    while (!ok) {
      if (++attempts > kMaxAttempts) {
        throw Error("could not place templates with cosine below " +
                    std::to_string(options.max_template_cosine));
      }
      double norm = 0.0;
      for (auto& x : t) {
        x = trng.Normal();
        norm += x * x;
      }
      norm = std::sqrt(norm);
      for (auto& x : t) x /= norm;
      ok = true;
      for (const auto& other : v.templates) {
        double c = 0.0;
        for (int k = 0; k < options.dim; ++k) c += t[k] * other[k];
        if (c >= options.max_template_cosine) {
          ok = false;
          break;
        }
      }
    }
    v.templates.push_back(t);
  }

  Rng drng = rng.Split(2);
  const double lo = std::log(options.min_mean_seconds);
  const double hi = std::log(options.max_mean_seconds);
  for (int tok = 0; tok < options.size; ++tok) {
    double mean;
    if (tok == kSilenceId) {
      mean = std::clamp(0.1, options.min_mean_seconds, options.max_mean_seconds);
    } else if (tok == kEndOfSequenceId) {
      mean = options.min_mean_seconds;
    } else {
      mean = std::exp(lo + (hi - lo) * drng.Uniform());
    }
    v.log_std.push_back(options.log_std);
    v.log_mean.push_back(std::log(mean) - 0.5 * options.log_std * options.log_std);
  }

  Rng srng = rng.Split(3);
  for (int s = 0; s < options.num_speakers; ++s) {
    Rng one = srng.Split(s);
    v.speaker_rate.push_back(
        std::exp(options.speaker_rate_spread * (2.0 * one.Uniform() - 1.0)));
    std::vector<double> factors(options.size);
    for (auto& f : factors) {
      f = std::exp(options.speaker_token_spread * one.Normal());
    }
    v.speaker_token_factor.push_back(std::move(factors));
  }
  return v;
}

std::vector<double> RenderFrames(const VocabSpec& vocab,
                                 std::span<const int> ids,
                                 std::span<const int> frames, double noise_std,
                                 Rng rng) {
  if (ids.size() != frames.size()) {
    throw Error("render: ids and frame counts differ in length");
  }
  const std::size_t K = vocab.dim;
  std::vector<double> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= vocab.size) {
      throw Error("render: unknown token id " + std::to_string(ids[i]));
    }
    const auto& tmpl = vocab.templates[ids[i]];
    const std::size_t n = frames[i];
    for (std::size_t j = 0; j < n; ++j) {
      const double gain = RampGain(j, n);
      for (std::size_t k = 0; k < K; ++k) {
        double x = gain * tmpl[k];
        if (noise_std > 0.0) x += noise_std * rng.Normal();
        out.push_back(x);
      }
    }
  }
  return out;
}

void SampleTokens(const VocabSpec& vocab, int num_tokens, int max_word_tokens,
                  Rng& rng, std::vector<int>* ids,
                  std::vector<std::pair<int, int>>* words) {
  ids->clear();
  words->clear();
  const int num_phones = vocab.size - 2;
  int remaining = num_tokens - 1;  // the end-of-sequence token
  while (remaining > 0) {
    int len = 1 + static_cast<int>(rng.Below(max_word_tokens));
    len = std::min(len, remaining);
    // Never leave a single slot that could not hold a silence plus a word.
    if (remaining - len == 1) ++len;
    if (num_phones == 1) len = 1;
    const int begin = static_cast<int>(ids->size());
    int previous = -1;
    for (int k = 0; k < len; ++k) {
      int tok;
      do {
        tok = 2 + static_cast<int>(rng.Below(num_phones));
      } while (tok == previous && num_phones > 1);
      ids->push_back(tok);
      previous = tok;
    }
    words->emplace_back(begin, begin + len);
    remaining -= len;
    if (remaining > 0) {
      ids->push_back(kSilenceId);
      --remaining;
    }
  }
  ids->push_back(kEndOfSequenceId);
}

std::vector<double> SampleDurations(const VocabSpec& vocab,
                                    std::span<const int> ids, int speaker,
                                    Rng& rng) {
  std::vector<double> d(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int tok = ids[i];
    const double base = std::exp(vocab.log_mean[tok] + vocab.log_std[tok] * rng.Normal());
    d[i] = std::max(vocab.hop, base * vocab.speaker_rate[speaker] *
                                   vocab.speaker_token_factor[speaker][tok]);
  }
  return d;
}

std::vector<int> TargetFrames(const Utterance& utt, double hop) {
  if (!utt.durations) {
    throw Error("utterance " + utt.id + " has no duration labels");
  }
  return SecondsToFrames(*utt.durations, hop);
}

Dataset GenerateCorpus(const VocabSpec& vocab, const CorpusOptions& options,
                       std::uint64_t seed) {
  if (vocab.size < 3 || vocab.templates.empty()) {
    throw Error("empty vocabulary");
  }
  if (options.min_tokens < 2 || options.max_tokens > 64 ||
      options.min_tokens > options.max_tokens) {
    throw Error("utterance length range must lie within [2, 64]");
  }
  if (!(options.noise_std >= 0.0)) throw Error("noise_std must be >= 0");
  Dataset ds;
  ds.vocab = vocab;
  Rng root(seed);
  for (int u = 0; u < options.num_utterances; ++u) {
    Rng rng = root.Split(static_cast<std::uint64_t>(u));
    Utterance utt;
    char name[32];
    std::snprintf(name, sizeof(name), "utt%05d", u);
    utt.id = name;
    utt.speaker = static_cast<int>(rng.Below(vocab.num_speakers()));
    const int n = options.min_tokens +
                  static_cast<int>(rng.Below(options.max_tokens - options.min_tokens + 1));
    SampleTokens(vocab, n, options.max_word_tokens, rng, &utt.ids, &utt.words);
    utt.durations = SampleDurations(vocab, utt.ids, utt.speaker, rng);
    const std::vector<int> frames = TargetFrames(utt, vocab.hop);
    utt.frames = RenderFrames(vocab, utt.ids, frames, options.noise_std, rng.Split(7));
    utt.num_frames = utt.frames.size() / vocab.dim;
    utt.noise_std = options.noise_std;
    ds.utterances.push_back(std::move(utt));
  }
  ds.vocab.garbage_penalty = CalibrateGarbagePenalty(ds);
  return ds;
}

double CalibrateGarbagePenalty(const Dataset& dataset) {
  const VocabSpec& v = dataset.vocab;
  std::vector<double> costs;
  for (const auto& utt : dataset.utterances) {
    if (!utt.durations) continue;
    const std::vector<int> frames = TargetFrames(utt, v.hop);
    std::size_t t = 0;
    for (std::size_t i = 0; i < utt.ids.size(); ++i) {
      const auto& tmpl = v.templates[utt.ids[i]];
      for (int j = 0; j < frames[i]; ++j, ++t) {
        double c = 0.0;
        for (int k = 0; k < v.dim; ++k) {
          const double d = utt.frames[t * v.dim + k] - tmpl[k];
          c += d * d;
        }
        costs.push_back(c);
      }
    }
  }
  if (costs.empty()) return 0.0;
  auto mid = costs.begin() + costs.size() / 2;
  std::nth_element(costs.begin(), mid, costs.end());
  return 2.0 * *mid;
}

std::vector<int> UnlabeledSpeakers(int num_speakers, double labeled_fraction,
                                   std::uint64_t seed) {
  if (!(labeled_fraction >= 0.0 && labeled_fraction <= 1.0)) {
    throw Error("labeled fraction must lie in [0, 1]");
  }
  const int count = static_cast<int>(
      std::lround((1.0 - labeled_fraction) * num_speakers));
  std::vector<int> order(num_speakers);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng(seed).Split(0x5eed);
  for (int i = num_speakers - 1; i > 0; --i) {
    std::swap(order[i], order[rng.Below(i + 1)]);
  }
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

Dataset SplitLabels(Dataset dataset, double labeled_fraction,
                    std::uint64_t seed) {
  const int speakers = dataset.vocab.num_speakers();
  if (speakers > 1) {
    const std::vector<int> drop =
        UnlabeledSpeakers(speakers, labeled_fraction, seed);
    for (auto& utt : dataset.utterances) {
      if (std::binary_search(drop.begin(), drop.end(), utt.speaker)) {
        utt.durations.reset();
      }
    }
  } else {
    const std::vector<int> drop = UnlabeledSpeakers(
        static_cast<int>(dataset.utterances.size()), labeled_fraction, seed);
    for (int idx : drop) dataset.utterances[idx].durations.reset();
  }
  return dataset;
}

std::string WordString(std::span<const int> token_ids) {
  std::string s;
  for (std::size_t i = 0; i < token_ids.size(); ++i) {
    if (i) s += '-';
    s += std::to_string(token_ids[i]);
  }
  return s;
}

std::vector<std::string> ReferenceWords(const Utterance& utt) {
  std::vector<std::string> words;
  for (const auto& [b, e] : utt.words) {
    words.push_back(WordString(std::span<const int>(utt.ids).subspan(b, e - b)));
  }
  return words;
}

// ---- persistence ------------------------------------------------------------------

namespace {

template <typename T>
void WriteRaw(std::ofstream& out, const std::vector<T>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
std::vector<T> ReadRaw(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (bytes % sizeof(T) != 0) throw Error("truncated file " + path.string());
  std::vector<T> v(bytes / sizeof(T));
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(bytes));
  return v;
}

json VocabToJson(const VocabSpec& v) {
  return json{{"size", v.size},
              {"dim", v.dim},
              {"hop", v.hop},
              {"templates", v.templates},
              {"log_mean", v.log_mean},
              {"log_std", v.log_std},
              {"speaker_rate", v.speaker_rate},
              {"speaker_token_factor", v.speaker_token_factor},
              {"garbage_penalty", v.garbage_penalty},
              {"silence_id", kSilenceId},
              {"eos_id", kEndOfSequenceId}};
}

VocabSpec VocabFromJson(const json& j) {
  VocabSpec v;
  v.size = j.at("size").get<int>();
  v.dim = j.at("dim").get<int>();
  v.hop = j.at("hop").get<double>();
  v.templates = j.at("templates").get<std::vector<std::vector<double>>>();
  v.log_mean = j.at("log_mean").get<std::vector<double>>();
  v.log_std = j.at("log_std").get<std::vector<double>>();
  v.speaker_rate = j.at("speaker_rate").get<std::vector<double>>();
  v.speaker_token_factor =
      j.at("speaker_token_factor").get<std::vector<std::vector<double>>>();
  v.garbage_penalty = j.at("garbage_penalty").get<double>();
  return v;
}

}  // namespace

void SaveDataset(const Dataset& dataset, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path root(dir);
  {
    std::ofstream out(root / "vocab.json");
    if (!out) throw Error("cannot write " + (root / "vocab.json").string());
    out << VocabToJson(dataset.vocab).dump(1) << '\n';
  }
  std::ofstream meta(root / "meta.jsonl");
  std::ofstream ids(root / "ids.u32", std::ios::binary);
  std::ofstream durs(root / "durations.f64", std::ios::binary);
  std::ofstream frames(root / "frames.f64", std::ios::binary);
  if (!meta || !ids || !durs || !frames) {
    throw Error("cannot write corpus files in " + dir);
  }
  for (const auto& utt : dataset.utterances) {
    json words = json::array();
    for (const auto& [b, e] : utt.words) words.push_back({b, e});
    json line{{"id", utt.id},
              {"N", utt.ids.size()},
              {"T", utt.num_frames},
              {"K", dataset.vocab.dim},
              {"speaker", utt.speaker},
              {"words", words},
              {"labeled", utt.labeled()},
              {"noise_std", utt.noise_std},
              {"noise_free", utt.noise_std == 0.0}};
    meta << line.dump() << '\n';
    std::vector<std::uint32_t> id32(utt.ids.begin(), utt.ids.end());
    WriteRaw(ids, id32);
    if (utt.durations) WriteRaw(durs, *utt.durations);
    WriteRaw(frames, utt.frames);
  }
}

Dataset LoadDataset(const std::string& dir) {
  const fs::path root(dir);
  Dataset ds;
  {
    std::ifstream in(root / "vocab.json");
    if (!in) throw Error("cannot open " + (root / "vocab.json").string());
    ds.vocab = VocabFromJson(json::parse(in));
  }
  const auto ids = ReadRaw<std::uint32_t>(root / "ids.u32");
  const auto durs = ReadRaw<double>(root / "durations.f64");
  const auto frames = ReadRaw<double>(root / "frames.f64");
  std::ifstream meta(root / "meta.jsonl");
  if (!meta) throw Error("cannot open " + (root / "meta.jsonl").string());
  std::size_t id_pos = 0, dur_pos = 0, frame_pos = 0;
  std::string line;
  while (std::getline(meta, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    Utterance utt;
    utt.id = j.at("id").get<std::string>();
    utt.speaker = j.at("speaker").get<int>();
    const std::size_t n = j.at("N").get<std::size_t>();
    utt.num_frames = j.at("T").get<std::size_t>();
    utt.noise_std = j.value("noise_std", 0.0);
    for (const auto& w : j.at("words")) {
      utt.words.emplace_back(w.at(0).get<int>(), w.at(1).get<int>());
    }
    const std::size_t nf = utt.num_frames * ds.vocab.dim;
    if (id_pos + n > ids.size() || frame_pos + nf > frames.size()) {
      throw Error("corpus data shorter than meta.jsonl describes");
    }
    utt.ids.assign(ids.begin() + id_pos, ids.begin() + id_pos + n);
    id_pos += n;
    if (j.at("labeled").get<bool>()) {
      if (dur_pos + n > durs.size()) throw Error("durations.f64 truncated");
      utt.durations.emplace(durs.begin() + dur_pos, durs.begin() + dur_pos + n);
      dur_pos += n;
    }
    utt.frames.assign(frames.begin() + frame_pos, frames.begin() + frame_pos + nf);
    frame_pos += nf;
    ds.utterances.push_back(std::move(utt));
  }
  if (id_pos != ids.size() || dur_pos != durs.size() ||
      frame_pos != frames.size()) {
    throw Error("corpus data longer than meta.jsonl describes");
  }
  return ds;
}

}  // namespace natts

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

#include "natts/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace natts {

namespace {

using Kind = ConfigKey::Kind;

std::vector<ConfigKey> BuildKeys() {
  return {
      // corpus
      {"seed", Kind::kInt, "1", "corpus", "Master seed; every random stream derives from it.", {}},
      {"utts", Kind::kInt, "200", "corpus", "Utterances to generate.", {}},
      {"vocab_size", Kind::kInt, "32", "corpus", "Tokens including silence (id 0) and end-of-sequence (id 1).", {}},
      {"frame_dim", Kind::kInt, "16", "corpus", "Channels per frame (full scale: 128).", {}},
      {"speakers", Kind::kInt, "4", "corpus", "Number of speakers.", {}},
      {"min_tokens", Kind::kInt, "4", "corpus", "Shortest utterance in tokens, at least 2.", {}},
      {"max_tokens", Kind::kInt, "12", "corpus", "Longest utterance in tokens, at most 64.", {}},
      {"max_word_tokens", Kind::kInt, "4", "corpus", "Longest word in tokens.", {}},
      {"noise_std", Kind::kDouble, "0", "corpus", "White noise added to rendered frames.", {}},
      {"hop", Kind::kDouble, "0.0125", "corpus", "Seconds per frame (full scale: 0.0125).", {}},
      {"duration_min_mean", Kind::kDouble, "0.05", "corpus", "Smallest per-token mean duration, seconds.", {}},
      {"duration_max_mean", Kind::kDouble, "0.2", "corpus", "Largest per-token mean duration, seconds.", {}},
      {"duration_log_std", Kind::kDouble, "0.15", "corpus", "Log-normal spread of token durations.", {}},
      {"speaker_rate_spread", Kind::kDouble, "0.15", "corpus", "Per-speaker log rate drawn from [-s, s].", {}},
      {"speaker_token_spread", Kind::kDouble, "0.25", "corpus", "Std of the per-(speaker, token) log duration factor.", {}},
      // model
      {"embed_dim", Kind::kInt, "32", "model", "Token embedding width (full scale: 512).", {}},
      {"encoder_conv_layers", Kind::kInt, "2", "model", "Encoder convolution blocks (full scale: 3).", {}},
      {"encoder_conv_channels", Kind::kInt, "32", "model", "Encoder convolution channels (full scale: 512).", {}},
      {"encoder_conv_kernel", Kind::kInt, "5", "model", "Encoder convolution kernel (full scale: 5).", {}},
      {"encoder_rnn_dim", Kind::kInt, "24", "model", "Encoder recurrent units per direction (full scale: 256).", {}},
      {"speaker_dim", Kind::kInt, "16", "model", "Speaker embedding width (full scale: 64).", {}},
      {"encoder_dropout", Kind::kDouble, "0.1", "model", "Dropout before each encoder convolution (full scale: 0.5).", {}},
      {"zoneout", Kind::kDouble, "0.1", "model", "Recurrent zoneout probability (full scale: 0.1).", {}},
      {"norm_decay", Kind::kDouble, "0.99", "model", "Decay of the running normalisation statistics.", {}},
      {"duration_rnn_dim", Kind::kInt, "16", "model", "Duration predictor units per direction (full scale: 2 x 64 layers).", {}},
      {"duration_init_seconds", Kind::kDouble, "0.1", "model", "Initial duration projection bias, seconds.", {}},
      {"range_rnn_dim", Kind::kInt, "16", "model", "Range predictor units per direction (full scale: 2 x 64 layers).", {}},
      {"learned_range", Kind::kBool, "true", "model", "Predict range parameters; false uses fixed_range.", {}},
      {"fixed_range", Kind::kDouble, "10.0", "model", "Range parameter (frames) when not learned.", {}},
      {"positional_dim", Kind::kInt, "16", "model", "Within-token positional embedding width (full scale: 32).", {}},
      {"positional_base", Kind::kDouble, "10000", "model", "Timestep denominator of the sinusoidal embedding.", {}},
      {"prenet_dim", Kind::kInt, "32", "model", "Width of both pre-net layers (full scale: 256).", {}},
      {"prenet_dropout", Kind::kDouble, "0.5", "model", "Pre-net dropout rate.", {}},
      {"prenet_dropout_at_inference", Kind::kBool, "true", "model", "Keep pre-net dropout active when synthesizing.", {}},
      {"decoder_rnn_dim", Kind::kInt, "64", "model", "Units in each of the two decoder recurrent layers (full scale: 1024).", {}},
      {"postnet_layers", Kind::kInt, "3", "model", "Post-net convolutions (full scale: 5).", {}},
      {"postnet_channels", Kind::kInt, "32", "model", "Post-net channels (full scale: 512).", {}},
      {"postnet_kernel", Kind::kInt, "5", "model", "Post-net kernel (full scale: 5).", {}},
      {"fvae_conv_channels", Kind::kInt, "16", "model", "Spectrogram encoder channels.", {}},
      {"fvae_conv_kernel", Kind::kInt, "3", "model", "Spectrogram encoder kernel (full scale: 3).", {}},
      {"fvae_rnn_dim", Kind::kInt, "16", "model", "Spectrogram encoder units per direction.", {}},
      {"attention_dim", Kind::kInt, "16", "model", "Query/key width of the latent attention.", {}},
      {"latent_dim", Kind::kInt, "8", "model", "Latent width (full scale: 8).", {}},
      {"latent_proj_dim", Kind::kInt, "16", "model", "Projected latent width (full scale: 16).", {}},
      // training
      {"regime", Kind::kChoice, "supervised", "train", "Duration supervision.", {"supervised", "semi", "unsupervised", "unsupervised-no-fvae"}},
      {"labeled_fraction", Kind::kDouble, "1.0", "train", "Share of speakers keeping duration labels (semi).", {}},
      {"steps", Kind::kInt, "3000", "train", "Optimizer steps.", {}},
      {"batch_size", Kind::kInt, "4", "train", "Utterances per step.", {}},
      {"learning_rate", Kind::kDouble, "1e-3", "train", "Peak learning rate (full scale: 1e-3).", {}},
      {"warmup_steps", Kind::kInt, "200", "train", "Linear warmup length.", {}},
      {"decay_start", Kind::kInt, "1500", "train", "Step at which the learning rate starts halving.", {}},
      {"decay_every", Kind::kInt, "500", "train", "Steps between halvings after decay_start.", {}},
      {"adam_beta1", Kind::kDouble, "0.9", "train", "Adam beta1 (full scale: 0.9).", {}},
      {"adam_beta2", Kind::kDouble, "0.999", "train", "Adam beta2 (full scale: 0.999).", {}},
      {"adam_epsilon", Kind::kDouble, "1e-6", "train", "Adam epsilon (full scale: 1e-6).", {}},
      {"l2", Kind::kDouble, "1e-6", "train", "L2 regularisation weight, applied to the gradient.", {}},
      {"clip_norm", Kind::kDouble, "1.0", "train", "Global gradient norm limit; 0 disables clipping.", {}},
      {"lambda_dur", Kind::kString, "auto", "train", "Duration loss weight; auto = 2 supervised, 100 semi, 0 otherwise.", {}},
      {"lambda_u", Kind::kString, "auto", "train", "Utterance-length loss weight; auto = 100 semi, 1 unsupervised with or without FVAE, 0 supervised.", {}},
      {"lambda_kl", Kind::kString, "auto", "train", "KL weight; auto = 1e-3 semi, 1e-4 unsupervised, 0 otherwise.", {}},
      {"utterance_loss_units", Kind::kChoice, "frames", "train", "Units of the utterance-length loss.", {"frames", "seconds"}},
      {"scale_factor_gradient", Kind::kBool, "true", "train", "Backpropagate through the T / sum(d) rescaling.", {}},
      {"log_every", Kind::kInt, "50", "train", "Metrics log interval in steps.", {}},
      {"checkpoint_every", Kind::kInt, "0", "train", "Checkpoint interval in steps; 0 saves only at the end.", {}},
      // synthesis
      {"pace", Kind::kDouble, "1.0", "synth", "Global pace factor; durations are divided by it.", {}},
      {"token_factors", Kind::kString, "", "synth", "Comma-separated per-token duration factors.", {}},
      {"latent_mode", Kind::kChoice, "zero", "synth", "Prior latents at inference.", {"zero", "sample"}},
      {"max_output_seconds", Kind::kDouble, "20", "synth", "Output cap in seconds (full scale: 120).", {}},
      {"synth_seed", Kind::kInt, "0", "synth", "Seed for pre-net dropout and latent sampling.", {}},
      {"write_svg", Kind::kBool, "false", "synth", "Also write SVG heatmaps.", {}},
      // evaluation
      {"unaligned_threshold", Kind::kDouble, "1.0", "eval", "Unaligned spans longer than this many seconds count towards UDR.", {}},
      {"udr_mode", Kind::kChoice, "pooled", "eval", "Corpus UDR: pooled durations or per-utterance mean.", {"pooled", "mean"}},
      {"feasibility_ratio", Kind::kDouble, "0.5", "eval", "Alignment is infeasible when the mean cost of its token-aligned frames exceeds this times the garbage penalty.", {}},
      {"aligner_max_token_frames", Kind::kInt, "160", "eval", "Longest span one token may occupy in the forced aligner.", {}},
      {"blank_norm", Kind::kDouble, "0.25", "eval", "Frames with a smaller norm are blanks for the recognizer.", {}},
  };
}

const ConfigKey& FindKey(const std::string& name) {
  for (const auto& k : RunConfig::Keys()) {
    if (k.name == name) return k;
  }
  throw Error("unknown config key '" + name + "'");
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool ParseInt(const std::string& v, std::int64_t* out) {
  if (v.empty()) return false;
  char* end = nullptr;
  errno = 0;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (errno != 0 || *end != '\0') return false;
  *out = x;
  return true;
}

bool ParseDouble(const std::string& v, double* out) {
  if (v.empty()) return false;
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(v.c_str(), &end);
  if (errno != 0 || *end != '\0') return false;
  *out = x;
  return true;
}

bool ParseBool(const std::string& v, bool* out) {
  if (v == "true" || v == "1" || v == "yes") {
    *out = true;
    return true;
  }
  if (v == "false" || v == "0" || v == "no") {
    *out = false;
    return true;
  }
  return false;
}

void Validate(const ConfigKey& key, const std::string& value) {
  std::int64_t i;
  double d;
  bool b;
  bool ok = true;
  switch (key.kind) {
    case Kind::kInt:
      ok = ParseInt(value, &i) && i >= 0;
      break;
    case Kind::kDouble:
      ok = ParseDouble(value, &d);
      break;
    case Kind::kBool:
      ok = ParseBool(value, &b);
      break;
    case Kind::kChoice:
      ok = std::find(key.choices.begin(), key.choices.end(), value) != key.choices.end();
      break;
    case Kind::kString:
      break;
  }
  if (!ok) {
    std::string expect;
    switch (key.kind) {
      case Kind::kInt: expect = "a non-negative integer"; break;
      case Kind::kDouble: expect = "a number"; break;
      case Kind::kBool: expect = "true or false"; break;
      default: {
        for (const auto& c : key.choices) expect += (expect.empty() ? "" : "|") + c;
      }
    }
    throw Error("config key '" + key.name + "': invalid value '" + value +
                "' (expected " + expect + ")");
  }
}

}  // namespace

const std::vector<ConfigKey>& RunConfig::Keys() {
  static const std::vector<ConfigKey> keys = BuildKeys();
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& k : Keys()) values_[k.name] = k.default_value;
}

void RunConfig::Set(const std::string& key, const std::string& value) {
  const ConfigKey& k = FindKey(key);
  const std::string v = Trim(value);
  Validate(k, v);
  values_[key] = v;
}

void RunConfig::LoadText(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(origin + ":" + std::to_string(number) +
                  ": expected 'key = value'");
    }
    try {
      Set(Trim(line.substr(0, eq)), Trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(origin + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

void RunConfig::LoadFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  LoadText(buf.str(), path);
}

const std::string& RunConfig::Get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error("unknown config key '" + key + "'");
  return it->second;
}

std::int64_t RunConfig::GetInt(const std::string& key) const {
  std::int64_t v;
  if (!ParseInt(Get(key), &v)) throw Error("config key '" + key + "' is not an integer");
  return v;
}

double RunConfig::GetDouble(const std::string& key) const {
  double v;
  if (!ParseDouble(Get(key), &v)) throw Error("config key '" + key + "' is not a number");
  return v;
}

bool RunConfig::GetBool(const std::string& key) const {
  bool v;
  if (!ParseBool(Get(key), &v)) throw Error("config key '" + key + "' is not a boolean");
  return v;
}

std::vector<double> RunConfig::GetDoubleList(const std::string& key) const {
  std::vector<double> out;
  std::stringstream in(Get(key));
  std::string item;
  while (std::getline(in, item, ',')) {
    item = Trim(item);
    double v;
    if (!ParseDouble(item, &v)) {
      throw Error("config key '" + key + "': '" + item + "' is not a number");
    }
    out.push_back(v);
  }
  return out;
}

std::string RunConfig::Dump(bool documented) const {
  std::ostringstream out;
  std::string section;
  for (const auto& k : Keys()) {
    if (documented) {
      if (k.section != section) {
        if (!section.empty()) out << '\n';
        out << "# ---- " << k.section << " ----\n";
        section = k.section;
      }
      out << "# " << k.doc;
      if (!k.choices.empty()) {
        out << " One of:";
        for (const auto& c : k.choices) out << ' ' << c;
        out << '.';
      }
      out << '\n';
    }
    out << k.name << " = " << Get(k.name) << '\n';
  }
  return out.str();
}

VocabOptions MakeVocabOptions(const RunConfig& c) {
  VocabOptions v;
  v.size = static_cast<int>(c.GetInt("vocab_size"));
  v.dim = static_cast<int>(c.GetInt("frame_dim"));
  v.num_speakers = static_cast<int>(c.GetInt("speakers"));
  v.hop = c.GetDouble("hop");
  v.min_mean_seconds = c.GetDouble("duration_min_mean");
  v.max_mean_seconds = c.GetDouble("duration_max_mean");
  v.log_std = c.GetDouble("duration_log_std");
  v.speaker_rate_spread = c.GetDouble("speaker_rate_spread");
  v.speaker_token_spread = c.GetDouble("speaker_token_spread");
  if (!(v.hop > 0.0)) throw Error("hop must be positive");
  return v;
}

CorpusOptions MakeCorpusOptions(const RunConfig& c) {
  CorpusOptions o;
  o.num_utterances = static_cast<int>(c.GetInt("utts"));
  o.min_tokens = static_cast<int>(c.GetInt("min_tokens"));
  o.max_tokens = static_cast<int>(c.GetInt("max_tokens"));
  o.max_word_tokens = static_cast<int>(c.GetInt("max_word_tokens"));
  o.noise_std = c.GetDouble("noise_std");
  if (o.max_word_tokens < 1) throw Error("max_word_tokens must be at least 1");
  return o;
}

ModelConfig MakeModelConfig(const RunConfig& c) {
  auto dim = [&](const char* key) {
    const auto v = c.GetInt(key);
    if (v <= 0) throw Error(std::string("config key '") + key + "' must be positive");
    return static_cast<std::size_t>(v);
  };
  auto rate = [&](const char* key) {
    const double v = c.GetDouble(key);
    if (!(v >= 0.0 && v < 1.0)) {
      throw Error(std::string("config key '") + key + "' must lie in [0, 1)");
    }
    return v;
  };
  ModelConfig m;
  m.frame_dim = dim("frame_dim");
  m.hop = c.GetDouble("hop");
  m.encoder.vocab_size = dim("vocab_size");
  m.encoder.num_speakers = dim("speakers");
  m.encoder.embed_dim = dim("embed_dim");
  m.encoder.conv_layers = static_cast<std::size_t>(c.GetInt("encoder_conv_layers"));
  m.encoder.conv_channels = dim("encoder_conv_channels");
  m.encoder.conv_kernel = dim("encoder_conv_kernel");
  if (m.encoder.conv_kernel % 2 == 0) throw Error("encoder_conv_kernel must be odd");
  m.encoder.rnn_dim = dim("encoder_rnn_dim");
  m.encoder.speaker_dim = dim("speaker_dim");
  m.encoder.dropout = rate("encoder_dropout");
  m.encoder.zoneout = rate("zoneout");
  m.norm_decay = rate("norm_decay");
  m.duration.rnn_dim = dim("duration_rnn_dim");
  m.duration.initial_seconds = c.GetDouble("duration_init_seconds");
  m.range.rnn_dim = dim("range_rnn_dim");
  m.range.learned = c.GetBool("learned_range");
  m.range.fixed_value = c.GetDouble("fixed_range");
  if (!(m.range.fixed_value > 0.0)) throw Error("fixed_range must be positive");
  m.positional_dim = dim("positional_dim");
  if (m.positional_dim % 2 != 0) throw Error("positional_dim must be even");
  m.positional_base = c.GetDouble("positional_base");
  m.decoder.prenet_dims[0] = m.decoder.prenet_dims[1] = dim("prenet_dim");
  m.decoder.prenet_dropout = rate("prenet_dropout");
  m.prenet_dropout_at_inference = c.GetBool("prenet_dropout_at_inference");
  m.decoder.rnn_dim = dim("decoder_rnn_dim");
  m.decoder.zoneout = m.encoder.zoneout;
  m.decoder.postnet_layers = dim("postnet_layers");
  m.decoder.postnet_channels = dim("postnet_channels");
  m.decoder.postnet_kernel = dim("postnet_kernel");
  if (m.decoder.postnet_kernel % 2 == 0) throw Error("postnet_kernel must be odd");
  m.fvae.conv_channels = dim("fvae_conv_channels");
  m.fvae.conv_kernel = dim("fvae_conv_kernel");
  if (m.fvae.conv_kernel % 2 == 0) throw Error("fvae_conv_kernel must be odd");
  m.fvae.rnn_dim = dim("fvae_rnn_dim");
  m.fvae.attention_dim = dim("attention_dim");
  m.fvae.latent_dim = dim("latent_dim");
  m.fvae.projected_dim = dim("latent_proj_dim");
  m.fvae.zoneout = m.encoder.zoneout;
  const std::string& regime = c.Get("regime");
  m.use_fvae = regime == "semi" || regime == "unsupervised";
  m.Finalize();
  return m;
}

}  // namespace natts

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


#include "natts/natts.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "natts/config.hpp"
#include "natts/corpus.hpp"
#include "natts/eval.hpp"
#include "natts/svg.hpp"
#include "natts/training.hpp"
#include "natts/verify.hpp"

struct natts_config {
  natts::RunConfig config;
};

struct natts_dataset {
  natts::Dataset data;
};

struct natts_model {
  std::unique_ptr<natts::Trainer> trainer;
};

namespace {

using json = nlohmann::json;

thread_local std::string last_error;

natts_status Fail(natts_status status, const std::string& message) {
  last_error = message;
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <typename F>
natts_status Guard(F&& body) {
  try {
    return body();
  } catch (const natts::DivergenceError& e) {
    return Fail(NATTS_DIVERGED, e.what());
  } catch (const std::bad_alloc&) {
    return Fail(NATTS_OUT_OF_MEMORY, "out of memory");
  } catch (const natts::Error& e) {
    return Fail(NATTS_ERROR, e.what());
  } catch (const nlohmann::json::exception& e) {
    return Fail(NATTS_ERROR, e.what());
  } catch (const std::exception& e) {
    return Fail(NATTS_INTERNAL, e.what());
  } catch (...) {
    return Fail(NATTS_INTERNAL, "unknown exception");
  }
}

#define NATTS_REQUIRE(ptr)                                                   \
  do {                                                                       \
    if ((ptr) == nullptr) {                                                  \
      return Fail(NATTS_INVALID_ARGUMENT, std::string(__func__) +            \
                                              ": " #ptr " must not be null"); \
    }                                                                        \
  } while (0)

char* CopyString(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

struct KeyStrings {
  std::string kind;
  std::string choices;
};

const std::vector<KeyStrings>& KeyTable() {
  static const std::vector<KeyStrings> table = [] {
    std::vector<KeyStrings> t;
    for (const natts::ConfigKey& k : natts::RunConfig::Keys()) {
      KeyStrings s;
      switch (k.kind) {
        case natts::ConfigKey::Kind::kInt: s.kind = "int"; break;
        case natts::ConfigKey::Kind::kDouble: s.kind = "double"; break;
        case natts::ConfigKey::Kind::kBool: s.kind = "bool"; break;
        case natts::ConfigKey::Kind::kString: s.kind = "string"; break;
        case natts::ConfigKey::Kind::kChoice: s.kind = "choice"; break;
      }
      for (std::size_t i = 0; i < k.choices.size(); ++i) {
        s.choices += (i ? "|" : "") + k.choices[i];
      }
      t.push_back(std::move(s));
    }
    return t;
  }();
  return table;
}

// Copies the dataset's shape into a model configuration.
natts::RunConfig DescribeData(natts::RunConfig config, const natts::Dataset& data) {
  config.Set("vocab_size", std::to_string(data.vocab.size));
  config.Set("frame_dim", std::to_string(data.vocab.dim));
  config.Set("speakers", std::to_string(data.vocab.num_speakers()));
  std::ostringstream hop;
  hop.precision(17);
  hop << data.vocab.hop;
  config.Set("hop", hop.str());
  return config;
}

void WriteLossSvg(const std::string& metrics_path, const std::string& svg_path) {
  std::ifstream in(metrics_path);
  if (!in) throw natts::Error("cannot read metrics log " + metrics_path);
  const char* keys[] = {"loss", "l_spec", "l_dur", "l_u", "kl", "val_mae"};
  std::vector<natts::Series> series;
  for (const char* k : keys) series.push_back({k, {}, {}});
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    for (natts::Series& s : series) {
      if (!j.contains(s.name)) continue;
      s.x.push_back(j.at("step").get<double>());
      s.y.push_back(j.at(s.name).get<double>());
    }
  }
  std::vector<natts::Series> used;
  for (natts::Series& s : series) {
    bool any = false;
    for (double y : s.y) any = any || y > 0.0;
    if (any) used.push_back(std::move(s));
  }
  natts::WriteTextFile(svg_path,
                       natts::LineChartSvg(used, "training losses", "step", true));
}

std::vector<double> ToVector(const natts::Tensor& t) {
  return {t.values().begin(), t.values().end()};
}

json AlignmentRecord(const natts::Utterance& utt, const natts::Synthesis& s) {
  return {{"id", utt.id},
          {"speaker", utt.speaker},
          {"tokens", utt.ids},
          {"predicted_seconds", s.predicted_seconds},
          {"seconds", s.seconds},
          {"frames", s.frames},
          {"centers", ToVector(s.centers)},
          {"sigma", ToVector(s.sigma)},
          {"num_frames", s.decoded.post.rows()},
          {"truncated", s.truncated}};
}

}  // namespace

extern "C" {

const char* natts_version(void) { return "0.1.0"; }

const char* natts_status_name(natts_status status) {
  switch (status) {
    case NATTS_OK: return "ok";
    case NATTS_INVALID_ARGUMENT: return "invalid argument";
    case NATTS_ERROR: return "error";
    case NATTS_DIVERGED: return "diverged";
    case NATTS_CHECK_FAILED: return "check failed";
    case NATTS_OUT_OF_MEMORY: return "out of memory";
    case NATTS_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* natts_last_error(void) { return last_error.c_str(); }

void natts_free_string(char* s) { delete[] s; }

// ---- configuration ------------------------------------------------------------

size_t natts_config_key_count(void) { return natts::RunConfig::Keys().size(); }

natts_status natts_config_key_info(size_t index, natts_key_info* info) {
  NATTS_REQUIRE(info);
  const auto& keys = natts::RunConfig::Keys();
  if (index >= keys.size()) {
    return Fail(NATTS_INVALID_ARGUMENT, "config key index out of range");
  }
  const natts::ConfigKey& k = keys[index];
  const KeyStrings& s = KeyTable()[index];
  info->name = k.name.c_str();
  info->default_value = k.default_value.c_str();
  info->section = k.section.c_str();
  info->doc = k.doc.c_str();
  info->kind = s.kind.c_str();
  info->choices = s.choices.c_str();
  return NATTS_OK;
}

natts_status natts_config_new(natts_config** out) {
  NATTS_REQUIRE(out);
  return Guard([&] {
    *out = new natts_config();
    return NATTS_OK;
  });
}

void natts_config_free(natts_config* config) { delete config; }

natts_status natts_config_set(natts_config* config, const char* key,
                              const char* value) {
  NATTS_REQUIRE(config);
  NATTS_REQUIRE(key);
  NATTS_REQUIRE(value);
  return Guard([&] {
    config->config.Set(key, value);
    return NATTS_OK;
  });
}

natts_status natts_config_load_file(natts_config* config, const char* path) {
  NATTS_REQUIRE(config);
  NATTS_REQUIRE(path);
  return Guard([&] {
    config->config.LoadFile(path);
    return NATTS_OK;
  });
}

natts_status natts_config_get(const natts_config* config, const char* key,
                              const char** value) {
  NATTS_REQUIRE(config);
  NATTS_REQUIRE(key);
  NATTS_REQUIRE(value);
  return Guard([&] {
    *value = config->config.Get(key).c_str();
    return NATTS_OK;
  });
}

natts_status natts_config_dump(const natts_config* config, int documented,
                               char** text) {
  NATTS_REQUIRE(config);
  NATTS_REQUIRE(text);
  return Guard([&] {
    *text = CopyString(config->config.Dump(documented != 0));
    return NATTS_OK;
  });
}

// ---- datasets -----------------------------------------------------------------

natts_status natts_dataset_generate(const natts_config* config,
                                    natts_dataset** out) {
  NATTS_REQUIRE(config);
  NATTS_REQUIRE(out);
  return Guard([&] {
    auto ds = std::make_unique<natts_dataset>();
    ds->data = natts::BuildDataset(config->config);
    *out = ds.release();
    return NATTS_OK;
  });
}

natts_status natts_dataset_load(const char* dir, natts_dataset** out) {
  NATTS_REQUIRE(dir);
  NATTS_REQUIRE(out);
  return Guard([&] {
    auto ds = std::make_unique<natts_dataset>();
    ds->data = natts::LoadDataset(dir);
    *out = ds.release();
    return NATTS_OK;
  });
}

natts_status natts_dataset_save(const natts_dataset* dataset, const char* dir) {
  NATTS_REQUIRE(dataset);
  NATTS_REQUIRE(dir);
  return Guard([&] {
    natts::SaveDataset(dataset->data, dir);
    return NATTS_OK;
  });
}

size_t natts_dataset_size(const natts_dataset* dataset) {
  return dataset ? dataset->data.utterances.size() : 0;
}

size_t natts_dataset_labeled(const natts_dataset* dataset) {
  if (!dataset) return 0;
  std::size_t n = 0;
  for (const auto& u : dataset->data.utterances) n += u.labeled();
  return n;
}

void natts_dataset_free(natts_dataset* dataset) { delete dataset; }

// ---- training -----------------------------------------------------------------

natts_status natts_train(const natts_config* config, const natts_dataset* dataset,
                         const natts_train_options* options) {
  NATTS_REQUIRE(config);
  NATTS_REQUIRE(dataset);
  NATTS_REQUIRE(options);
  NATTS_REQUIRE(options->checkpoint_path);
  return Guard([&] {
    std::unique_ptr<natts::Trainer> trainer;
    if (options->resume_path) {
      trainer = std::make_unique<natts::Trainer>(
          natts::Trainer::Load(options->resume_path));
      trainer->SetTotalSteps(config->config.GetInt("steps"));
    } else {
      trainer = std::make_unique<natts::Trainer>(
          DescribeData(config->config, dataset->data));
    }
    const natts::RunConfig& rc = trainer->config();
    const natts::Dataset* data = &dataset->data;
    natts::Dataset split;
    const double fraction = rc.GetDouble("labeled_fraction");
    if (fraction < 1.0) {
      split = natts::SplitLabels(dataset->data, fraction,
                                 natts::DeriveSeed(rc.GetInt("seed"), 5));
      data = &split;
    }

    natts::TrainRunOptions run;
    run.checkpoint_path = options->checkpoint_path;
    if (options->metrics_path) run.metrics_path = options->metrics_path;
    if (options->validation) run.validation = &options->validation->data;
    if (options->log) {
      const natts::TrainConfig& tc = trainer->train_config();
      run.on_log = [&](std::size_t step, const natts::LossReport& report) {
        const std::string line = natts::LossReportJson(
            step, natts::LearningRate(tc, step - 1), report);
        options->log(line.c_str(), options->user);
      };
    }
    natts::RunTraining(*trainer, *data, run);
    if (options->loss_svg_path && options->metrics_path) {
      WriteLossSvg(options->metrics_path, options->loss_svg_path);
    }
    return NATTS_OK;
  });
}

natts_status natts_model_load(const char* checkpoint_path, natts_model** out) {
  NATTS_REQUIRE(checkpoint_path);
  NATTS_REQUIRE(out);
  return Guard([&] {
    auto m = std::make_unique<natts_model>();
    m->trainer = std::make_unique<natts::Trainer>(
        natts::Trainer::Load(checkpoint_path));
    *out = m.release();
    return NATTS_OK;
  });
}

void natts_model_free(natts_model* model) { delete model; }

size_t natts_model_step(const natts_model* model) {
  return model ? model->trainer->step() : 0;
}

natts_status natts_model_config(const natts_model* model, char** text) {
  NATTS_REQUIRE(model);
  NATTS_REQUIRE(text);
  return Guard([&] {
    *text = CopyString(model->trainer->config().Dump(false));
    return NATTS_OK;
  });
}

natts_status natts_model_duration_mae(const natts_model* model,
                                      const natts_dataset* dataset, double* mae) {
  NATTS_REQUIRE(model);
  NATTS_REQUIRE(dataset);
  NATTS_REQUIRE(mae);
  return Guard([&] {
    *mae = natts::DurationMae(model->trainer->model(), dataset->data);
    return NATTS_OK;
  });
}

// ---- synthesis ----------------------------------------------------------------

natts_status natts_synthesize(const natts_model* model, const natts_config* config,
                              const natts_dataset* input,
                              const char* utterance_id, const char* out_dir,
                              natts_dataset** out) {
  NATTS_REQUIRE(model);
  NATTS_REQUIRE(config);
  NATTS_REQUIRE(input);
  return Guard([&] {
    const natts::RunConfig& rc = config->config;
    const natts::Model& m = model->trainer->model();
    const natts::Dataset& in = input->data;
    if (in.vocab.size != static_cast<int>(m.config().encoder.vocab_size) ||
        in.vocab.dim != static_cast<int>(m.config().frame_dim)) {
      throw natts::Error("input vocabulary does not match the model");
    }
    natts::SynthesisOptions opts;
    opts.pace = rc.GetDouble("pace");
    opts.token_factors = rc.GetDoubleList("token_factors");
    opts.latent_mode = natts::ParseLatentMode(rc.Get("latent_mode"));
    opts.max_output_seconds = rc.GetDouble("max_output_seconds");
    const natts::Rng seeds(static_cast<std::uint64_t>(rc.GetInt("synth_seed")));
    const bool svg = out_dir && rc.GetBool("write_svg");

    auto result = std::make_unique<natts_dataset>();
    result->data.vocab = in.vocab;
    std::vector<json> records;
    for (std::size_t i = 0; i < in.utterances.size(); ++i) {
      const natts::Utterance& utt = in.utterances[i];
      if (utterance_id && utt.id != utterance_id) continue;
      if (!opts.token_factors.empty() && opts.token_factors.size() != utt.size()) {
        throw natts::Error("token_factors has " +
                           std::to_string(opts.token_factors.size()) +
                           " values but utterance " + utt.id + " has " +
                           std::to_string(utt.size()) + " tokens");
      }
      opts.seed = seeds.Split(i).NextU64();
      const natts::Synthesis s = natts::Synthesize(m, utt.ids, utt.speaker, opts);
      natts::Utterance o;
      o.id = utt.id;
      o.speaker = utt.speaker;
      o.ids = utt.ids;
      o.words = utt.words;
      o.num_frames = s.decoded.post.rows();
      o.frames.assign(s.decoded.post.values().begin(), s.decoded.post.values().end());
      std::vector<double> seconds;
      for (int f : s.frames) seconds.push_back(f * in.vocab.hop);
      // Truncated outputs no longer match their frame plan.
      if (!s.truncated) o.durations = seconds;
      records.push_back(AlignmentRecord(o, s));
      if (svg) {
        const std::filesystem::path plots = std::filesystem::path(out_dir) / "plots";
        std::filesystem::create_directories(plots);
        natts::WriteTextFile(
            (plots / (o.id + ".spectrogram.svg")).string(),
            natts::HeatmapSvg(o.frames, o.num_frames, in.vocab.dim,
                              o.id + " synthesized frames", "frame", "channel"));
        natts::WriteTextFile(
            (plots / (o.id + ".alignment.svg")).string(),
            natts::HeatmapSvg(s.weights.values(), s.weights.rows(), s.weights.cols(),
                              o.id + " upsampling weights", "frame", "token"));
      }
      result->data.utterances.push_back(std::move(o));
    }
    if (result->data.utterances.empty()) {
      throw natts::Error(utterance_id ? std::string("no utterance with id ") + utterance_id
                                      : std::string("input dataset is empty"));
    }
    if (out_dir) {
      natts::SaveDataset(result->data, out_dir);
      std::ofstream f(std::filesystem::path(out_dir) / "alignment.jsonl");
      if (!f) throw natts::Error(std::string("cannot write alignment.jsonl in ") + out_dir);
      for (const json& r : records) f << r.dump() << '\n';
    }
    if (out) *out = result.release();
    return NATTS_OK;
  });
}

// ---- evaluation ---------------------------------------------------------------

natts_status natts_evaluate(const natts_config* config, const natts_dataset* outputs,
                            const char* json_path, const char* csv_path,
                            char** report_json) {
  NATTS_REQUIRE(config);
  NATTS_REQUIRE(outputs);
  return Guard([&] {
    const natts::RunConfig& rc = config->config;
    natts::EvalOptions opts;
    opts.align.max_token_frames =
        static_cast<std::size_t>(rc.GetInt("aligner_max_token_frames"));
    opts.align.feasibility_ratio = rc.GetDouble("feasibility_ratio");
    opts.udr.threshold_seconds = rc.GetDouble("unaligned_threshold");
    opts.udr.pooled = rc.Get("udr_mode") == "pooled";
    opts.blank_norm = rc.GetDouble("blank_norm");
    const natts::EvalReport report = natts::Evaluate(outputs->data, opts);
    const std::string j = report.ToJson();
    if (json_path) natts::WriteTextFile(json_path, j);
    if (csv_path) natts::WriteTextFile(csv_path, report.ToCsv());
    if (report_json) *report_json = CopyString(j);
    return NATTS_OK;
  });
}

// ---- verification -------------------------------------------------------------

size_t natts_verify_suite_count(void) { return natts::SuiteNames().size(); }

const char* natts_verify_suite_name(size_t index) {
  const auto& names = natts::SuiteNames();
  return index < names.size() ? names[index].c_str() : nullptr;
}

natts_status natts_verify(const char* only, uint64_t seed, natts_log_fn log,
                          void* user) {
  return Guard([&] {
    std::vector<std::string> suites;
    if (only && *only) {
      std::stringstream ss(only);
      std::string name;
      while (std::getline(ss, name, ',')) {
        bool known = false;
        for (const auto& s : natts::SuiteNames()) known = known || s == name;
        if (!known) throw natts::Error("unknown verification suite: " + name);
        suites.push_back(name);
      }
    } else {
      suites = natts::SuiteNames();
    }
    std::size_t failed = 0;
    for (const std::string& name : suites) {
      const natts::SuiteResult r = natts::RunSuite(name, seed);
      for (const natts::CheckResult& c : r.checks) {
        failed += !c.passed;
        if (log) {
          const std::string line = std::string(c.passed ? "ok   " : "FAIL ") +
                                   name + ": " + c.name + "  (" + c.detail + ")";
          log(line.c_str(), user);
        }
      }
      if (log) {
        std::ostringstream line;
        line.precision(3);
        line << "suite " << name << ": " << (r.passed() ? "passed" : "FAILED")
             << " in " << r.seconds << " s";
        log(line.str().c_str(), user);
      }
    }
    if (failed > 0) {
      return Fail(NATTS_CHECK_FAILED,
                  std::to_string(failed) + " verification check(s) failed");
    }
    return NATTS_OK;
  });
}

}  // extern "C"

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


// natts command-line tool. Every configuration key is also a flag
// (--key-name); values are resolved as defaults < --config file < flags.

#include <cstdio>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "natts/natts.h"

namespace {

struct KeyFlags {
  std::map<std::string, std::string> values;  // key -> flag value as given
  std::string config_file;
  bool print_config = false;
};

std::string FlagName(std::string key) {
  for (char& c : key) {
    if (c == '_') c = '-';
  }
  return "--" + key;
}

std::string TypeName(const std::string& kind) {
  if (kind == "int") return "INT";
  if (kind == "double") return "FLOAT";
  if (kind == "bool") return "BOOL";
  return "TEXT";
}

// Adds one flag per configuration key in `sections` plus any `extra` keys.
void AddKeyFlags(CLI::App* app, KeyFlags* flags,
                 const std::set<std::string>& sections,
                 const std::set<std::string>& extra = {}) {
  app->add_option("--config", flags->config_file,
                  "Configuration file of key = value lines, applied before flags")
      ->check(CLI::ExistingFile);
  app->add_flag("--print-config", flags->print_config,
                "Print the resolved configuration and exit");
  for (size_t i = 0; i < natts_config_key_count(); ++i) {
    natts_key_info info;
    natts_config_key_info(i, &info);
    if (!sections.count(info.section) && !extra.count(info.name)) continue;
    std::string help = std::string(info.doc) + " [" + info.kind;
    if (*info.choices) help += ": " + std::string(info.choices);
    help += ", default: " + std::string(*info.default_value ? info.default_value : "\"\"") + "]";
    const std::string key = info.name;
    app->add_option_function<std::string>(
           FlagName(key),
           [flags, key](const std::string& v) { flags->values[key] = v; }, help)
        ->type_name(*info.choices ? info.choices : TypeName(info.kind))
        ->group(std::string(info.section) + " options");
  }
}

int Report(natts_status status) {
  if (status == NATTS_OK) return 0;
  std::fprintf(stderr, "natts: %s: %s\n", natts_status_name(status),
               natts_last_error());
  return 1;
}

// Resolved configuration, or nullptr after printing the error.
natts_config* Resolve(const KeyFlags& flags) {
  natts_config* config = nullptr;
  natts_status s = natts_config_new(&config);
  if (s == NATTS_OK && !flags.config_file.empty()) {
    s = natts_config_load_file(config, flags.config_file.c_str());
  }
  for (const auto& [key, value] : flags.values) {
    if (s != NATTS_OK) break;
    s = natts_config_set(config, key.c_str(), value.c_str());
  }
  if (s != NATTS_OK) {
    Report(s);
    natts_config_free(config);
    return nullptr;
  }
  return config;
}

int PrintConfig(const natts_config* config) {
  char* text = nullptr;
  const natts_status s = natts_config_dump(config, 1, &text);
  if (s != NATTS_OK) return Report(s);
  std::fputs(text, stdout);
  natts_free_string(text);
  return 0;
}

void PrintLine(const char* line, void*) {
  std::puts(line);
  std::fflush(stdout);
}

struct Handles {
  natts_config* config = nullptr;
  natts_dataset* data = nullptr;
  natts_dataset* other = nullptr;
  natts_model* model = nullptr;
  ~Handles() {
    natts_model_free(model);
    natts_dataset_free(other);
    natts_dataset_free(data);
    natts_config_free(config);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"natts: duration-based text-to-frames synthesis on a synthetic "
               "corpus, with robustness metrics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", natts_version());

  // gen-corpus
  KeyFlags gen_flags;
  std::string gen_out;
  CLI::App* gen = app.add_subcommand("gen-corpus", "Generate a synthetic corpus directory");
  gen->add_option("--out", gen_out, "Output directory")->required();
  AddKeyFlags(gen, &gen_flags, {"corpus"}, {"labeled_fraction"});

  // train
  KeyFlags train_flags;
  std::string train_data, train_checkpoint, train_metrics, train_resume,
      train_validation, train_loss_svg;
  bool train_quiet = false;
  CLI::App* train = app.add_subcommand("train", "Train a model on a corpus directory");
  train->add_option("--data", train_data, "Corpus directory")->required()
      ->check(CLI::ExistingDirectory);
  train->add_option("--checkpoint", train_checkpoint, "Checkpoint to write")->required();
  train->add_option("--metrics", train_metrics,
                    "Metrics log (JSON lines) written every log_every steps");
  train->add_option("--resume", train_resume,
                    "Continue from this checkpoint; its configuration is kept "
                    "except for --steps")
      ->check(CLI::ExistingFile);
  train->add_option("--validation", train_validation,
                    "Corpus directory whose duration MAE is added to the metrics log")
      ->check(CLI::ExistingDirectory);
  train->add_option("--loss-svg", train_loss_svg,
                    "Loss curve plot written from the metrics log at the end");
  train->add_flag("--quiet", train_quiet, "Do not echo metrics to stdout");
  AddKeyFlags(train, &train_flags, {"model", "train"}, {"seed"});

  // synth
  KeyFlags synth_flags;
  std::string synth_checkpoint, synth_input, synth_out, synth_utt;
  CLI::App* synth = app.add_subcommand(
      "synth", "Synthesize the token sequences of a corpus directory");
  synth->add_option("--checkpoint", synth_checkpoint, "Trained checkpoint")->required()
      ->check(CLI::ExistingFile);
  synth->add_option("--input", synth_input,
                    "Corpus directory supplying token sequences and speakers")
      ->required()->check(CLI::ExistingDirectory);
  synth->add_option("--out", synth_out,
                    "Output directory: corpus-format outputs plus alignment.jsonl")
      ->required();
  synth->add_option("--utt", synth_utt, "Only synthesize the utterance with this id");
  AddKeyFlags(synth, &synth_flags, {"synth"});

  // eval
  KeyFlags eval_flags;
  std::string eval_input, eval_json, eval_csv;
  CLI::App* eval = app.add_subcommand(
      "eval", "Robustness report (UDR, WER breakdown) for a directory of outputs");
  eval->add_option("--input", eval_input, "Directory of outputs in corpus format")
      ->required()->check(CLI::ExistingDirectory);
  eval->add_option("--json", eval_json, "Write the JSON report here");
  eval->add_option("--csv", eval_csv, "Write per-utterance rows here");
  AddKeyFlags(eval, &eval_flags, {"eval"});

  // verify
  std::string verify_only;
  std::uint64_t verify_seed = 1;
  CLI::App* verify = app.add_subcommand(
      "verify", "Run the gradient, invariant and oracle suites");
  std::string suites;
  for (size_t i = 0; i < natts_verify_suite_count(); ++i) {
    suites += (i ? ", " : "") + std::string(natts_verify_suite_name(i));
  }
  verify->add_option("--only", verify_only,
                     "Comma-separated suites to run (" + suites + ")");
  verify->add_option("--seed", verify_seed, "Seed of the random instances")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  Handles h;
  if (gen->parsed()) {
    if (!(h.config = Resolve(gen_flags))) return 1;
    if (gen_flags.print_config) return PrintConfig(h.config);
    if (natts_status s = natts_dataset_generate(h.config, &h.data); s != NATTS_OK) {
      return Report(s);
    }
    if (natts_status s = natts_dataset_save(h.data, gen_out.c_str()); s != NATTS_OK) {
      return Report(s);
    }
    std::printf("wrote %zu utterances (%zu labeled) to %s\n",
                natts_dataset_size(h.data), natts_dataset_labeled(h.data),
                gen_out.c_str());
    return 0;
  }
  if (train->parsed()) {
    if (!(h.config = Resolve(train_flags))) return 1;
    if (train_flags.print_config) return PrintConfig(h.config);
    if (natts_status s = natts_dataset_load(train_data.c_str(), &h.data); s != NATTS_OK) {
      return Report(s);
    }
    if (!train_validation.empty()) {
      if (natts_status s = natts_dataset_load(train_validation.c_str(), &h.other);
          s != NATTS_OK) {
        return Report(s);
      }
    }
    natts_train_options opts{};
    opts.checkpoint_path = train_checkpoint.c_str();
    opts.metrics_path = train_metrics.empty() ? nullptr : train_metrics.c_str();
    opts.resume_path = train_resume.empty() ? nullptr : train_resume.c_str();
    opts.loss_svg_path = train_loss_svg.empty() ? nullptr : train_loss_svg.c_str();
    opts.validation = h.other;
    opts.log = train_quiet ? nullptr : PrintLine;
    if (!train_loss_svg.empty() && train_metrics.empty()) {
      std::fprintf(stderr, "natts: --loss-svg needs --metrics\n");
      return 2;
    }
    return Report(natts_train(h.config, h.data, &opts));
  }
  if (synth->parsed()) {
    if (!(h.config = Resolve(synth_flags))) return 1;
    if (synth_flags.print_config) return PrintConfig(h.config);
    if (natts_status s = natts_model_load(synth_checkpoint.c_str(), &h.model);
        s != NATTS_OK) {
      return Report(s);
    }
    if (natts_status s = natts_dataset_load(synth_input.c_str(), &h.data); s != NATTS_OK) {
      return Report(s);
    }
    if (natts_status s = natts_synthesize(h.model, h.config, h.data,
                                          synth_utt.empty() ? nullptr : synth_utt.c_str(),
                                          synth_out.c_str(), &h.other);
        s != NATTS_OK) {
      return Report(s);
    }
    std::printf("wrote %zu utterances to %s\n", natts_dataset_size(h.other),
                synth_out.c_str());
    return 0;
  }
  if (eval->parsed()) {
    if (!(h.config = Resolve(eval_flags))) return 1;
    if (eval_flags.print_config) return PrintConfig(h.config);
    if (natts_status s = natts_dataset_load(eval_input.c_str(), &h.data); s != NATTS_OK) {
      return Report(s);
    }
    char* report = nullptr;
    const natts_status s = natts_evaluate(
        h.config, h.data, eval_json.empty() ? nullptr : eval_json.c_str(),
        eval_csv.empty() ? nullptr : eval_csv.c_str(), &report);
    if (s != NATTS_OK) return Report(s);
    nlohmann::json summary = nlohmann::json::parse(report);
    natts_free_string(report);
    summary.erase("rows");
    std::puts(summary.dump(2).c_str());
    return 0;
  }
  if (verify->parsed()) {
    const natts_status s = natts_verify(verify_only.c_str(), verify_seed, PrintLine, nullptr);
    return Report(s);
  }
  return 2;
}

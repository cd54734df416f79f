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

// Run configuration: a flat set of documented keys with defaults.
//
// Text format, one setting per line:
//
//   # comment
//   key = value
//
// Unknown keys and malformed values are rejected. Later settings override
// earlier ones, so a file can be layered over the defaults and command-line
// flags over the file.

#ifndef NATTS_CONFIG_HPP_
#define NATTS_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "natts/corpus.hpp"
#include "natts/model.hpp"

namespace natts {

struct ConfigKey {
  enum class Kind { kInt, kDouble, kBool, kString, kChoice };
  std::string name;
  Kind kind;
  std::string default_value;
  std::string section;
  std::string doc;
  std::vector<std::string> choices;  // for kChoice; "auto" style values too
};

class RunConfig {
 public:
  RunConfig();

  static const std::vector<ConfigKey>& Keys();

  /// Throws Error on an unknown key or a value of the wrong type.
  void Set(const std::string& key, const std::string& value);
  /// Parses "key = value" lines.
  void LoadText(const std::string& text, const std::string& origin = "config");
  void LoadFile(const std::string& path);

  const std::string& Get(const std::string& key) const;
  std::int64_t GetInt(const std::string& key) const;
  double GetDouble(const std::string& key) const;
  bool GetBool(const std::string& key) const;
  /// Comma-separated list of numbers; empty string gives an empty list.
  std::vector<double> GetDoubleList(const std::string& key) const;

  /// Every key with its current value. With `documented`, each key is
  /// preceded by its description and section headers are emitted.
  std::string Dump(bool documented = false) const;

 private:
  std::map<std::string, std::string> values_;
};

VocabOptions MakeVocabOptions(const RunConfig& config);
CorpusOptions MakeCorpusOptions(const RunConfig& config);

/// Model dimensions from the configuration; vocabulary, speaker count, frame
/// width and hop come from the config keys of the same names.
ModelConfig MakeModelConfig(const RunConfig& config);

}  // namespace natts

#endif  // NATTS_CONFIG_HPP_

// Copyright 2026 The cswhisper Authors.
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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cswhisper/adapt/recipe.hpp"
#include "cswhisper/corpus/manifest.hpp"
#include "cswhisper/decode/decode.hpp"
#include "cswhisper/prompt/prompt.hpp"

namespace csw::experiment {

/// A manifest, optionally narrowed to one of its splits, under a column name.
struct SplitRef {
  std::string name;
  std::filesystem::path manifest;
  std::optional<std::string> filter;  ///< value of the records' `split` field

  corpus::CorpusManifest load() const;
};

struct AblationSpec {
  std::vector<double> hours{1, 4, 7, 10, 20, 40};
  bool include_full = true;  ///< add the whole train split as the last point
  std::vector<bool> freeze{false, true};
  prompt::PromptStrategy strategy = prompt::PromptStrategy::official("en");
  int max_steps = 8000;  ///< for subsets; the full point uses training.max_steps
  std::uint64_t subset_seed = 0;
  bool independent_subsets = false;  ///< redraw per size instead of nesting
  /// Horizontal reference lines for the curves, e.g. an external system.
  std::map<std::string, double> references;
};

/// Declarative description of a zero-shot / fine-tune / ablation study.
/// Relative paths are resolved against the spec file's directory.
struct ExperimentSpec {
  std::string name;
  std::filesystem::path model;  ///< directory written by EncoderDecoderModel::save
  std::optional<SplitRef> train;
  std::vector<SplitRef> eval;
  std::vector<prompt::PromptStrategy> strategies;
  /// Defaults to `strategies` without Auto, which has nothing to train on.
  std::vector<prompt::PromptStrategy> finetune_strategies;
  adapt::TrainingConfig training;
  decode::DecodeConfig decode;  ///< the strategy field is replaced per cell
  int average_last = 5;
  AblationSpec ablation;
  std::filesystem::path output_dir;

  /// Throws ConfigError listing every invalid strategy and setting. With a
  /// vocabulary, language labels must also resolve to tokens.
  void validate(const text::Vocabulary* vocab = nullptr) const;
  /// Canonical form; output_dir is left out so a study can move.
  nlohmann::ordered_json to_json() const;
  static ExperimentSpec from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  /// Hash of to_json().
  std::string fingerprint() const;
};

ExperimentSpec load_spec(const std::filesystem::path& path);

/// CSW_MODEL_DIR fills in a missing model, CSW_SEED replaces the training
/// seed, CSW_DEVICE must be unset or "cpu".
void apply_environment(ExperimentSpec& spec);

}  // namespace csw::experiment

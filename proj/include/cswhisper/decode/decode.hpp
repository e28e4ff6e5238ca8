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

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cswhisper/audio/features.hpp"
#include "cswhisper/corpus/manifest.hpp"
#include "cswhisper/nn/model.hpp"
#include "cswhisper/prompt/prompt.hpp"

namespace csw::decode {

/// Greedy decoding under a fixed prompt. No temperature fallback, no
/// timestamps, no long-form stitching.
struct DecodeConfig {
  prompt::PromptStrategy strategy = prompt::PromptStrategy::automatic();
  int beam_size = 1;  ///< only 1 is implemented
  int max_output_tokens = 64;
  /// Mask every special token except end-of-text when picking outputs.
  bool suppress_special_outputs = true;
  /// Append the no-timestamps marker to the prompt.
  bool no_timestamps = false;
  /// Let Auto language detection pick an installed fused slot. Off by
  /// default: the fused row replaced a real language.
  bool fused_in_auto = false;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static DecodeConfig from_json(const nlohmann::json& j);
};

struct Hypothesis {
  std::string utt_id;
  /// Detokenized text tokens (specials stripped), with malformed UTF-8
  /// replaced by U+FFFD.
  std::string text;
  std::optional<std::string> detected_language;  ///< Auto mode only
  /// Full decoder stream: the prompt, then generated tokens, then eot if emitted.
  std::vector<int> token_ids;
  bool runaway = false;  ///< stopped by max_output_tokens or the text context
  std::optional<std::string> error;  ///< per-utterance failure, e.g. unreadable audio

  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
};

/// Throws ConfigError when the prompt does not fit the model's token table.
Hypothesis transcribe(const nn::SequenceModel& model, const audio::FeatureMatrix& features,
                      const DecodeConfig& config, std::span<const nn::FusedTokenRecord> installed = {});

nlohmann::ordered_json to_json(const Hypothesis& h);
Hypothesis hypothesis_from_json(const nlohmann::json& j);
/// One JSON object per line; an unterminated last line (interrupted write)
/// is ignored.
std::vector<Hypothesis> load_hypotheses(const std::filesystem::path& path);

struct BatchOptions {
  /// JSONL output; utterances already in it are not decoded again.
  std::filesystem::path output;
  std::span<const nn::FusedTokenRecord> installed;
  /// Stop after this many newly decoded utterances (for tests and chunked runs).
  std::optional<std::size_t> limit;
  std::function<void(const Hypothesis&)> on_hypothesis;
};

/// One hypothesis per record in manifest order. Feature extraction runs in
/// parallel; decoding is sequential. Unreadable audio is recorded on the
/// hypothesis and the run continues.
std::vector<Hypothesis> batch_transcribe(const nn::SequenceModel& model, const corpus::CorpusManifest& manifest,
                                         const DecodeConfig& config, const BatchOptions& options = {});

}  // namespace csw::decode

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

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cswhisper/nn/model.hpp"
#include "cswhisper/text/vocabulary.hpp"

namespace csw::prompt {

enum class StrategyKind { kOfficial, kAuto, kCombined, kFused, kReference };

const char* to_string(StrategyKind kind);

/// Weighted sum of existing language embeddings written into a sacrificed
/// language slot. Labels are language codes ("en", "zh", "ru").
struct FusedEmbeddingSpec {
  std::vector<std::string> sources{"en", "zh"};
  std::vector<double> weights{0.5, 0.5};
  std::string slot = "ru";  ///< acoustically and linguistically far from both sources
  std::string label = "en-zh";

  friend bool operator==(const FusedEmbeddingSpec&, const FusedEmbeddingSpec&) = default;
};

/// How the decoder is told which language(s) to expect.
///   official(L)    <|sot|><|L|><|asr|>
///   auto           <|sot|>, the model predicts the language
///   combined(A,B)  <|sot|><|A|><|B|><|asr|>
///   fused(spec)    <|sot|><|label|><|asr|>, the label lives in spec.slot
///   reference(L)   like official, for a language absent from the data
struct PromptStrategy {
  StrategyKind kind = StrategyKind::kAuto;
  std::vector<std::string> languages;
  std::optional<FusedEmbeddingSpec> fused;

  static PromptStrategy official(std::string lang);
  static PromptStrategy automatic();
  static PromptStrategy combined(std::string first, std::string second);
  static PromptStrategy fusion(FusedEmbeddingSpec spec = {});
  static PromptStrategy reference(std::string lang);

  /// Short-form symbolic prompt without sot/task, e.g. "<|en|><|zh|>" or "Auto".
  std::string symbol() const;
  /// File-system safe id, e.g. "official-en", "combined-en-zh", "fused-en-zh".
  std::string slug() const;

  nlohmann::ordered_json to_json() const;
  static PromptStrategy from_json(const nlohmann::json& j);
  /// "official:zh", "auto", "combined:en,zh", "fused" or "fused:en,zh",
  /// "reference:ru".
  static PromptStrategy parse(std::string_view text);

  friend bool operator==(const PromptStrategy&, const PromptStrategy&) = default;
};

struct Diagnostic {
  std::string field;
  std::string message;
};

/// Every violated precondition, instead of failing later inside training.
/// With a vocabulary, language labels are also checked for resolvability.
std::vector<Diagnostic> validate_strategy(const PromptStrategy& strategy,
                                          const text::Vocabulary* vocab = nullptr);

/// Decoder prefix. `token_ids` always starts with sot; unless the strategy is
/// Auto it ends with the transcribe token. The optional no-timestamps marker
/// is kept apart so shape checks see only the prompt proper.
struct PromptSequence {
  std::vector<int> token_ids;
  bool no_timestamps = false;

  /// What the decoder is fed.
  std::vector<int> decoder_prefix(const text::Vocabulary& vocab) const;
};

/// Throws ConfigError for unresolvable labels, or for Fused when no fused
/// token with the spec's label is installed.
PromptSequence build_prompt_sequence(const PromptStrategy& strategy, const text::Vocabulary& vocab,
                                     std::span<const nn::FusedTokenRecord> installed = {},
                                     bool no_timestamps = false);

/// "<|sot|><|en|><|zh|><|asr|>", with installed fused slots shown by label.
std::string render(std::span<const int> ids, const text::Vocabulary& vocab,
                   std::span<const nn::FusedTokenRecord> installed = {});

struct ResolvedFusion {
  std::vector<int> source_tokens;
  std::vector<double> weights;
  int slot_token = -1;
  std::string label;
};

/// Label -> id resolution plus the spec invariants; throws ConfigError.
ResolvedFusion resolve_fusion(const FusedEmbeddingSpec& spec, const text::Vocabulary& vocab);

/// sum_i weight_i * row(source_i), accumulated in double. Does not touch the
/// table. Throws ConfigError when a source row is out of range.
std::vector<float> build_fused_embedding(const nn::TokenEmbeddingTable& table, const ResolvedFusion& fusion);

/// Everything needed to put the slot back.
struct InstallReceipt {
  int slot_token = -1;
  std::string label;
  std::vector<float> previous_row;
  std::string previous_checksum;
  std::string installed_checksum;
  std::optional<nn::FusedTokenRecord> previous_record;
};

/// Overwrites exactly the slot row and registers the label with the model.
/// Single writer: callers serialize this against training and decoding.
/// Throws RuntimeFailure on a read-only table.
InstallReceipt install_fused_embedding(nn::EncoderDecoderModel& model, const FusedEmbeddingSpec& spec);
/// Restores the slot row; throws RuntimeFailure if the row was modified
/// since the install.
void undo_install(nn::EncoderDecoderModel& model, const InstallReceipt& receipt);

std::string row_checksum(std::span<const float> row);
std::vector<std::string> row_checksums(const nn::TokenEmbeddingTable& table);

}  // namespace csw::prompt

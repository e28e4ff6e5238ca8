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

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cswhisper/scoring/align.hpp"

namespace csw::scoring {

struct ErrorCounts {
  std::size_t n_ref = 0;
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  ErrorCounts& operator+=(const ErrorCounts& other);
  friend bool operator==(const ErrorCounts&, const ErrorCounts&) = default;
};

/// Mixed Error Rate = 100 * (S + D + I) / N over mixed Han/Latin tokens.
/// Insertions are unbounded, so values above 100 are legitimate.
struct MerReport {
  std::string utt_id;  ///< empty for corpus-level reports
  std::size_t utterances = 0;
  ErrorCounts counts;
  /// Indexed by TokenClass. Substitutions and deletions are charged to the
  /// reference token's class, insertions to the hypothesis token's class.
  std::array<ErrorCounts, 3> per_class{};
  /// Undefined when there are no reference tokens.
  std::optional<double> mer;
};

/// Utterance-level report from an alignment. `n_ref` must equal the number
/// of reference tokens in `steps`.
MerReport compute_mer(std::span<const AlignmentStep> steps, std::size_t n_ref);

/// Corpus report from summed counts (never the mean of per-utterance rates).
/// Throws ConfigError if the total reference count is zero.
MerReport aggregate(std::span<const MerReport> reports);

struct TextPair {
  std::string utt_id;
  std::string reference;   ///< raw transcript
  std::string hypothesis;  ///< raw hypothesis text
};

struct ScoredUtterance {
  MerReport report;
  std::vector<AlignmentStep> steps;
};

/// normalize -> tokenize -> align -> compute_mer for one pair.
ScoredUtterance score_pair(const TextPair& pair);

namespace serial {
std::vector<ScoredUtterance> score_pairs(std::span<const TextPair> pairs);
}
/// Same as serial::score_pairs with utterances spread across OpenMP threads.
std::vector<ScoredUtterance> score_pairs(std::span<const TextPair> pairs);

nlohmann::ordered_json to_json(const MerReport& report);
std::string alignment_dump(const ScoredUtterance& scored);

}  // namespace csw::scoring

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
#include <vector>

#include "cswhisper/scoring/mixed_text.hpp"

namespace csw::scoring {

enum class EditOp { kMatch, kSubstitute, kDelete, kInsert };

const char* to_string(EditOp op);

/// One column of an alignment. Match and substitute carry both tokens,
/// delete only the reference token, insert only the hypothesis token.
struct AlignmentStep {
  EditOp op = EditOp::kMatch;
  std::optional<MixedToken> ref;
  std::optional<MixedToken> hyp;
};

/// Minimum edit-distance alignment with unit costs. Where several optimal
/// paths exist, the backtrace prefers match, then substitute, then delete,
/// then insert, so the result is deterministic.
std::vector<AlignmentStep> align(std::span<const MixedToken> ref,
                                 std::span<const MixedToken> hyp);

/// Levenshtein distance only (two-row DP), for callers that do not need
/// the path.
std::size_t edit_distance(std::span<const MixedToken> ref, std::span<const MixedToken> hyp);

/// Sum of non-match steps.
std::size_t error_count(std::span<const AlignmentStep> steps);

}  // namespace csw::scoring

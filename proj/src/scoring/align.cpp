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

#include "cswhisper/scoring/align.hpp"

#include <algorithm>

namespace csw::scoring {

const char* to_string(EditOp op) {
  switch (op) {
    case EditOp::kMatch: return "match";
    case EditOp::kSubstitute: return "sub";
    case EditOp::kDelete: return "del";
    case EditOp::kInsert: return "ins";
  }
  return "?";
}

std::vector<AlignmentStep> align(std::span<const MixedToken> ref,
                                 std::span<const MixedToken> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  const std::size_t width = m + 1;
  std::vector<std::uint32_t> cost((n + 1) * width);
  auto at = [&](std::size_t i, std::size_t j) -> std::uint32_t& { return cost[i * width + j]; };

  for (std::size_t j = 0; j <= m; ++j) at(0, j) = static_cast<std::uint32_t>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    at(i, 0) = static_cast<std::uint32_t>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const std::uint32_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0u : 1u);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }

  std::vector<AlignmentStep> steps;
  steps.reserve(std::max(n, m));
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    const std::uint32_t here = at(i, j);
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (same && here == at(i - 1, j - 1)) {
        steps.push_back({EditOp::kMatch, ref[i - 1], hyp[j - 1]});
        --i, --j;
        continue;
      }
      if (!same && here == at(i - 1, j - 1) + 1) {
        steps.push_back({EditOp::kSubstitute, ref[i - 1], hyp[j - 1]});
        --i, --j;
        continue;
      }
    }
    if (i > 0 && here == at(i - 1, j) + 1) {
      steps.push_back({EditOp::kDelete, ref[i - 1], std::nullopt});
      --i;
      continue;
    }
    steps.push_back({EditOp::kInsert, std::nullopt, hyp[j - 1]});
    --j;
  }
  std::reverse(steps.begin(), steps.end());
  return steps;
}

std::size_t edit_distance(std::span<const MixedToken> ref, std::span<const MixedToken> hyp) {
  std::vector<std::size_t> prev(hyp.size() + 1);
  std::vector<std::size_t> cur(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      cur[j] = std::min({prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1), prev[j] + 1,
                         cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[hyp.size()];
}

std::size_t error_count(std::span<const AlignmentStep> steps) {
  return static_cast<std::size_t>(std::count_if(
      steps.begin(), steps.end(), [](const AlignmentStep& s) { return s.op != EditOp::kMatch; }));
}

}  // namespace csw::scoring

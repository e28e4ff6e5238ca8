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
#include <random>
#include <span>
#include <vector>

namespace csw {

// std::uniform_int_distribution and std::shuffle are implementation-defined,
// so seeded orders go through these helpers to stay reproducible.

/// Uniform integer in [0, bound) by rejection sampling on mt19937_64.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);

/// Fisher-Yates permutation of 0..n-1 for `seed`.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

/// Standard normal via Box-Muller on the 53-bit uniform from `rng`.
double standard_normal(std::mt19937_64& rng);

}  // namespace csw

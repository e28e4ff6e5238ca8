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

#include "cswhisper/corpus/manifest.hpp"

namespace csw::corpus {

/// Toy code-switched corpus for smoke runs: each transcript is a short mix
/// of Mandarin and English words, and its audio is a sequence of tone
/// bursts, one per character, pitch keyed to the character. Learnable by a
/// tiny model, meaningless as speech.
struct SynthConfig {
  int train_utterances = 24;
  int dev_utterances = 6;
  int test_utterances = 0;
  std::uint64_t seed = 0;
  int sample_rate = 16000;
  double char_seconds = 0.07;  ///< tone length per character
  double gap_seconds = 0.02;   ///< silence after each character
  int min_words = 2;
  int max_words = 3;
};

/// Writes `<dir>/wav/*.wav` and `<dir>/manifest.jsonl` and returns the
/// manifest. Deterministic for a fixed config.
CorpusManifest synthesize_corpus(const std::filesystem::path& dir, const SynthConfig& config);

}  // namespace csw::corpus

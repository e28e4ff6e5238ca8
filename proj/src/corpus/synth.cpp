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

#include "cswhisper/corpus/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "cswhisper/audio/wav.hpp"
#include "cswhisper/common/error.hpp"
#include "cswhisper/common/hash.hpp"
#include "cswhisper/common/random.hpp"
#include "cswhisper/text/utf8.hpp"

namespace csw::corpus {

namespace fs = std::filesystem;

namespace {

constexpr const char* kMandarin[] = {"我们", "今天", "那个", "可以", "因为", "开会"};
constexpr const char* kEnglish[] = {"go", "meeting", "ok", "lunch", "project", "so"};

// Distinct pitch per code point, spread over 200..3800 Hz.
double pitch_of(char32_t cp) {
  const auto h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&cp), sizeof cp));
  return 200.0 + static_cast<double>(h % 97) * 37.0;
}

}  // namespace

CorpusManifest synthesize_corpus(const fs::path& dir, const SynthConfig& c) {
  if (c.train_utterances < 0 || c.dev_utterances < 0 || c.test_utterances < 0 ||
      c.train_utterances + c.dev_utterances + c.test_utterances == 0)
    throw ConfigError("synthetic corpus needs at least one utterance");
  if (c.min_words <= 0 || c.max_words < c.min_words) throw ConfigError("bad synthetic word counts");
  if (!(c.char_seconds > 0) || c.gap_seconds < 0) throw ConfigError("bad synthetic timing");
  fs::create_directories(dir / "wav");
  std::mt19937_64 rng(c.seed);
  std::vector<UtteranceRecord> records;
  const int total = c.train_utterances + c.dev_utterances + c.test_utterances;
  for (int u = 0; u < total; ++u) {
    const int words = c.min_words + static_cast<int>(uniform_below(rng, c.max_words - c.min_words + 1));
    std::string text;
    bool last_latin = false;
    bool has_han = false, has_latin = false;
    for (int w = 0; w < words; ++w) {
      // Alternate scripts at least once per utterance.
      bool latin = uniform_below(rng, 2) == 1;
      if (w == words - 1 && !has_han) latin = false;
      if (w == words - 1 && !has_latin && words > 1) latin = true;
      const char* word = latin ? kEnglish[uniform_below(rng, std::size(kEnglish))]
                               : kMandarin[uniform_below(rng, std::size(kMandarin))];
      if (!text.empty() && (latin || last_latin)) text += ' ';
      text += word;
      last_latin = latin;
      (latin ? has_latin : has_han) = true;
    }

    audio::Waveform wave;
    wave.sample_rate = c.sample_rate;
    const auto tone = static_cast<std::size_t>(c.char_seconds * c.sample_rate);
    const auto gap = static_cast<std::size_t>(c.gap_seconds * c.sample_rate);
    wave.samples.assign(gap, 0.0f);
    for (char32_t cp : text::decode_utf8(text)) {
      if (cp == U' ') {
        wave.samples.insert(wave.samples.end(), gap * 2, 0.0f);
        continue;
      }
      const double f = pitch_of(cp);
      for (std::size_t i = 0; i < tone; ++i) {
        const double env = std::sin(std::numbers::pi * static_cast<double>(i) / tone);
        wave.samples.push_back(static_cast<float>(
            0.4 * env * std::sin(2 * std::numbers::pi * f * static_cast<double>(i) / c.sample_rate)));
      }
      wave.samples.insert(wave.samples.end(), gap, 0.0f);
    }

    UtteranceRecord r;
    const char* split = u < c.train_utterances                        ? "train"
                        : u < c.train_utterances + c.dev_utterances ? "dev"
                                                                    : "test";
    r.utt_id = std::string(split) + "-" + std::to_string(u);
    r.audio = "wav/" + r.utt_id + ".wav";
    r.duration = wave.duration_seconds();
    r.text = text;
    r.split = split;
    audio::write_wav(dir / r.audio, wave);
    records.push_back(std::move(r));
  }
  CorpusManifest manifest("manifest", std::move(records), dir);
  save_manifest(dir / "manifest.jsonl", manifest);
  return manifest;
}

}  // namespace csw::corpus

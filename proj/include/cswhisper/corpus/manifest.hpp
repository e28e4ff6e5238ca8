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
#include <string_view>
#include <vector>

#include <json.hpp>

namespace csw::corpus {

/// One pre-segmented utterance. `split` is free-form so corpus-specific
/// names ("Dev_Man", "Dev1", ...) coexist with train/dev/test.
struct UtteranceRecord {
  std::string utt_id;
  std::string audio;  ///< as written in the manifest; see CorpusManifest::resolve_audio
  double duration = 0.0;  ///< seconds, trusted from the manifest
  std::string text;
  std::string split;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();  ///< unknown keys, kept verbatim

  friend bool operator==(const UtteranceRecord&, const UtteranceRecord&) = default;
};

/// Immutable, validated collection of records. Construction rejects
/// duplicate ids and non-positive durations.
class CorpusManifest {
 public:
  CorpusManifest() = default;
  CorpusManifest(std::string name, std::vector<UtteranceRecord> records,
                 std::filesystem::path base_dir = {});

  const std::string& name() const { return name_; }
  const std::vector<UtteranceRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  /// Sum of record durations in seconds, accumulated in manifest order.
  double total_duration() const { return total_duration_; }
  double total_hours() const { return total_duration_ / 3600.0; }
  double max_duration() const { return max_duration_; }
  const std::filesystem::path& base_dir() const { return base_dir_; }

  /// Relative audio paths are resolved against the manifest's directory.
  std::filesystem::path resolve_audio(const UtteranceRecord& record) const;
  const UtteranceRecord* find(std::string_view utt_id) const;
  /// Records of one split, as a new manifest sharing the base directory.
  CorpusManifest filter_split(std::string_view split) const;
  /// Hash of the serialized form; stable across load/save round trips.
  std::string fingerprint() const;

  friend bool operator==(const CorpusManifest& a, const CorpusManifest& b) {
    return a.name_ == b.name_ && a.records_ == b.records_;
  }

 private:
  std::string name_;
  std::vector<UtteranceRecord> records_;
  std::filesystem::path base_dir_;
  double total_duration_ = 0.0;
  double max_duration_ = 0.0;
};

/// Parses JSON-lines manifest text. Every line must be an object with
/// utt_id, audio, duration, text and split; errors name the line number.
/// Also rejects records whose text is empty after normalization.
CorpusManifest parse_manifest(std::string_view contents, std::string name,
                              std::filesystem::path base_dir = {});
CorpusManifest load_manifest(const std::filesystem::path& path);
std::string serialize_manifest(const CorpusManifest& manifest);
void save_manifest(const std::filesystem::path& path, const CorpusManifest& manifest);

/// Seeded shuffle, then greedy accumulation until the running duration
/// first reaches `target_hours`. The result keeps manifest order, and for a
/// fixed seed a larger target always yields a superset.
CorpusManifest subset_by_duration(const CorpusManifest& manifest, double target_hours,
                                  std::uint64_t seed);

struct LanguageTagStats {
  std::size_t han_token_count = 0;
  std::size_t latin_token_count = 0;
  std::size_t other_token_count = 0;
  /// han / (han + latin); empty when neither class occurs.
  std::optional<double> han_ratio;
};

LanguageTagStats language_tag_stats(const CorpusManifest& manifest);

struct SplitSummary {
  std::size_t utterances = 0;
  double hours = 0.0;
  LanguageTagStats tags;
};

/// Per-split utterance counts, hours and script balance.
std::map<std::string, SplitSummary> summarize(const CorpusManifest& manifest);

struct DurationMismatch {
  std::string utt_id;
  double manifest_seconds = 0.0;
  std::optional<double> audio_seconds;  ///< empty when the header is unreadable
};

/// Cross-checks manifest durations against WAV headers.
std::vector<DurationMismatch> verify_durations(const CorpusManifest& manifest,
                                               double tolerance_seconds = 0.01);

}  // namespace csw::corpus

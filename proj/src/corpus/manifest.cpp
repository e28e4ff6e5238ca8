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

#include "cswhisper/corpus/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "cswhisper/audio/wav.hpp"
#include "cswhisper/common/error.hpp"
#include "cswhisper/common/files.hpp"
#include "cswhisper/common/hash.hpp"
#include "cswhisper/common/random.hpp"
#include "cswhisper/scoring/mixed_text.hpp"

namespace csw::corpus {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

CorpusManifest::CorpusManifest(std::string name, std::vector<UtteranceRecord> records,
                               fs::path base_dir)
    : name_(std::move(name)), records_(std::move(records)), base_dir_(std::move(base_dir)) {
  std::unordered_set<std::string_view> seen;
  for (const auto& r : records_) {
    if (!seen.insert(r.utt_id).second) throw ConfigError("duplicate utt_id: " + r.utt_id);
    if (!(r.duration > 0.0) || !std::isfinite(r.duration))
      throw ConfigError("non-positive duration for utt_id " + r.utt_id);
    total_duration_ += r.duration;
    max_duration_ = std::max(max_duration_, r.duration);
  }
}

fs::path CorpusManifest::resolve_audio(const UtteranceRecord& record) const {
  fs::path p(record.audio);
  if (p.is_absolute() || base_dir_.empty()) return p;
  return base_dir_ / p;
}

const UtteranceRecord* CorpusManifest::find(std::string_view utt_id) const {
  for (const auto& r : records_)
    if (r.utt_id == utt_id) return &r;
  return nullptr;
}

CorpusManifest CorpusManifest::filter_split(std::string_view split) const {
  std::vector<UtteranceRecord> kept;
  for (const auto& r : records_)
    if (r.split == split) kept.push_back(r);
  return CorpusManifest(name_ + ":" + std::string(split), std::move(kept), base_dir_);
}

std::string CorpusManifest::fingerprint() const {
  Fnv1a64 h;
  h.update(serialize_manifest(*this));
  return h.hex();
}

namespace {

const char* const kRequired[] = {"utt_id", "audio", "duration", "text", "split"};

std::string line_prefix(std::size_t line) { return "manifest line " + std::to_string(line) + ": "; }

UtteranceRecord parse_record(const std::string& text, std::size_t line) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(line_prefix(line) + "parse error: " + e.what());
  }
  if (!j.is_object()) throw ConfigError(line_prefix(line) + "expected a JSON object");
  for (const char* key : kRequired)
    if (!j.contains(key)) throw ConfigError(line_prefix(line) + "missing field '" + key + "'");

  auto str = [&](const char* key) {
    if (!j[key].is_string())
      throw ConfigError(line_prefix(line) + "field '" + key + "' must be a string");
    return j[key].get<std::string>();
  };
  UtteranceRecord r;
  r.utt_id = str("utt_id");
  r.audio = str("audio");
  r.text = str("text");
  r.split = str("split");
  if (!j["duration"].is_number())
    throw ConfigError(line_prefix(line) + "field 'duration' must be a number");
  r.duration = j["duration"].get<double>();
  if (!(r.duration > 0.0))
    throw ConfigError(line_prefix(line) + "duration must be positive for " + r.utt_id);
  if (r.utt_id.empty()) throw ConfigError(line_prefix(line) + "empty utt_id");
  if (scoring::normalize_text(r.text).empty())
    throw ConfigError(line_prefix(line) + "text is empty after normalization for " + r.utt_id);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find_if(std::begin(kRequired), std::end(kRequired),
                     [&](const char* k) { return it.key() == k; }) == std::end(kRequired))
      r.extra[it.key()] = it.value();
  }
  return r;
}

}  // namespace

CorpusManifest parse_manifest(std::string_view contents, std::string name, fs::path base_dir) {
  std::vector<UtteranceRecord> records;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= contents.size()) {
    auto end = contents.find('\n', start);
    if (end == std::string_view::npos) end = contents.size();
    ++line_no;
    std::string line(contents.substr(start, end - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) {
      auto rec = parse_record(line, line_no);
      if (!seen.insert(rec.utt_id).second)
        throw ConfigError(line_prefix(line_no) + "duplicate utt_id: " + rec.utt_id);
      records.push_back(std::move(rec));
    }
    if (end == contents.size()) break;
    start = end + 1;
  }
  return CorpusManifest(std::move(name), std::move(records), std::move(base_dir));
}

CorpusManifest load_manifest(const fs::path& path) {
  const std::string contents = read_file(path);
  return parse_manifest(contents, path.stem().string(), path.parent_path());
}

std::string serialize_manifest(const CorpusManifest& manifest) {
  std::string out;
  for (const auto& r : manifest.records()) {
    ordered_json j;
    j["utt_id"] = r.utt_id;
    j["audio"] = r.audio;
    j["duration"] = r.duration;
    j["text"] = r.text;
    j["split"] = r.split;
    for (auto it = r.extra.begin(); it != r.extra.end(); ++it) j[it.key()] = it.value();
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_manifest(const fs::path& path, const CorpusManifest& manifest) {
  write_file_atomic(path, serialize_manifest(manifest));
}

CorpusManifest subset_by_duration(const CorpusManifest& manifest, double target_hours,
                                  std::uint64_t seed) {
  if (!(target_hours > 0.0)) throw ConfigError("subset target must be positive");
  const double total = manifest.total_duration();
  double target = target_hours * 3600.0;
  if (target > total) {
    if (target - total > 1e-9 * std::max(1.0, total))
      throw ConfigError("subset target " + std::to_string(target_hours) +
                        " h exceeds available duration " + std::to_string(total / 3600.0) +
                        " h");
    target = total;
  }
  const auto order = seeded_permutation(manifest.size(), seed);
  std::vector<std::size_t> chosen;
  double acc = 0.0;
  for (std::size_t idx : order) {
    if (acc >= target) break;
    acc += manifest.records()[idx].duration;
    chosen.push_back(idx);
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<UtteranceRecord> records;
  records.reserve(chosen.size());
  for (std::size_t idx : chosen) records.push_back(manifest.records()[idx]);
  char label[64];
  std::snprintf(label, sizeof(label), "%s@%gh", manifest.name().c_str(), target_hours);
  return CorpusManifest(label, std::move(records), manifest.base_dir());
}

LanguageTagStats language_tag_stats(const CorpusManifest& manifest) {
  LanguageTagStats s;
  for (const auto& r : manifest.records()) {
    for (const auto& tok : scoring::mixed_tokenize(scoring::normalize_text(r.text))) {
      switch (tok.klass) {
        case scoring::TokenClass::kHan: ++s.han_token_count; break;
        case scoring::TokenClass::kLatin: ++s.latin_token_count; break;
        case scoring::TokenClass::kOther: ++s.other_token_count; break;
      }
    }
  }
  const std::size_t denom = s.han_token_count + s.latin_token_count;
  if (denom > 0) s.han_ratio = static_cast<double>(s.han_token_count) / static_cast<double>(denom);
  return s;
}

std::map<std::string, SplitSummary> summarize(const CorpusManifest& manifest) {
  std::map<std::string, SplitSummary> out;
  for (const auto& r : manifest.records()) {
    auto& s = out[r.split];
    ++s.utterances;
    s.hours += r.duration / 3600.0;
  }
  for (auto& [split, summary] : out) summary.tags = language_tag_stats(manifest.filter_split(split));
  return out;
}

std::vector<DurationMismatch> verify_durations(const CorpusManifest& manifest,
                                               double tolerance_seconds) {
  std::vector<DurationMismatch> bad;
  for (const auto& r : manifest.records()) {
    try {
      const auto info = audio::read_wav_info(manifest.resolve_audio(r));
      if (std::abs(info.duration_seconds() - r.duration) > tolerance_seconds)
        bad.push_back({r.utt_id, r.duration, info.duration_seconds()});
    } catch (const Error&) {
      bad.push_back({r.utt_id, r.duration, std::nullopt});
    }
  }
  return bad;
}

}  // namespace csw::corpus

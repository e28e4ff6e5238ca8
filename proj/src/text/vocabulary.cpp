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

#include "cswhisper/text/vocabulary.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>

#include <unicode/uchar.h>

#include "cswhisper/common/error.hpp"
#include "cswhisper/text/utf8.hpp"

namespace csw::text {

namespace {

constexpr int kSpecialsBeforeTimestamps = 2 + Vocabulary::kNumLanguages + 6;

const char* const kTaskLabels[] = {"translate", "transcribe", "startoflm",
                                   "startofprev", "nospeech", "notimestamps"};

std::string base64_decode(std::string_view in) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::string out;
  unsigned buffer = 0;
  int bits = 0;
  for (char c : in) {
    if (c == '=') break;
    const int v = value(c);
    if (v < 0) throw ConfigError("invalid base64 in rank file");
    buffer = (buffer << 6) | static_cast<unsigned>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((buffer >> bits) & 0xff));
    }
  }
  return out;
}

bool is_letter(char32_t c) { return u_isalpha(static_cast<UChar32>(c)) != 0; }
bool is_number(char32_t c) {
  const auto t = u_charType(static_cast<UChar32>(c));
  return t == U_DECIMAL_DIGIT_NUMBER || t == U_LETTER_NUMBER || t == U_OTHER_NUMBER;
}
bool is_ws(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)) != 0; }
bool is_other(char32_t c) { return !is_ws(c) && !is_letter(c) && !is_number(c); }

}  // namespace

Vocabulary::Vocabulary(int text_size, bool with_timestamps)
    : text_size_(text_size),
      size_(text_size + kSpecialsBeforeTimestamps + (with_timestamps ? kNumTimestamps : 0)) {}

std::string Vocabulary::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids)
    if (id >= 0 && id < text_size_) out += token_bytes(id);
  return out;
}

std::optional<int> Vocabulary::language_token(std::string_view code) const {
  const auto it = std::find(kLanguageCodes.begin(), kLanguageCodes.end(), code);
  if (it == kLanguageCodes.end()) return std::nullopt;
  return first_language() + static_cast<int>(it - kLanguageCodes.begin());
}

std::optional<std::string_view> Vocabulary::language_of(int id) const {
  if (!is_language(id)) return std::nullopt;
  return kLanguageCodes[static_cast<std::size_t>(id - first_language())];
}

std::vector<int> Vocabulary::language_token_ids() const {
  std::vector<int> ids(kNumLanguages);
  for (int i = 0; i < kNumLanguages; ++i) ids[i] = first_language() + i;
  return ids;
}

std::string Vocabulary::token_label(int id) const {
  if (id < 0 || id >= size_) return "<|invalid:" + std::to_string(id) + "|>";
  if (id < text_size_) return token_bytes(id);
  if (id == eot()) return "<|endoftext|>";
  if (id == sot()) return "<|startoftranscript|>";
  if (auto lang = language_of(id)) return "<|" + std::string(*lang) + "|>";
  if (id <= no_timestamps()) return std::string("<|") + kTaskLabels[id - translate()] + "|>";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "<|%.2f|>", (id - no_timestamps() - 1) * 0.02);
  return buf;
}

std::optional<int> Vocabulary::special_from_label(std::string_view label) const {
  if (label.size() < 4 || label.substr(0, 2) != "<|" || label.substr(label.size() - 2) != "|>")
    return std::nullopt;
  const std::string_view inner = label.substr(2, label.size() - 4);
  if (inner == "endoftext") return eot();
  if (inner == "startoftranscript") return sot();
  if (auto lang = language_token(inner)) return lang;
  for (int i = 0; i < 6; ++i)
    if (inner == kTaskLabels[i]) return translate() + i;
  for (int id = no_timestamps() + 1; id < size_; ++id)
    if (token_label(id) == label) return id;
  return std::nullopt;
}

ByteVocabulary::ByteVocabulary() : Vocabulary(256, false) {
  bytes_.reserve(256);
  for (int b = 0; b < 256; ++b) bytes_.emplace_back(1, static_cast<char>(b));
}

std::vector<int> ByteVocabulary::encode(std::string_view text) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (unsigned char c : text) ids.push_back(c);
  return ids;
}

const std::string& ByteVocabulary::token_bytes(int id) const {
  return bytes_.at(static_cast<std::size_t>(id));
}

TiktokenVocabulary::TiktokenVocabulary(std::vector<std::string> tokens)
    : Vocabulary(static_cast<int>(tokens.size()), true), tokens_(std::move(tokens)) {
  ranks_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) ranks_.emplace(tokens_[i], static_cast<int>(i));
}

std::filesystem::path TiktokenVocabulary::default_rank_file() {
  return std::filesystem::path(CSW_ASSET_DIR) / "multilingual.tiktoken";
}

std::shared_ptr<const TiktokenVocabulary> TiktokenVocabulary::load(
    const std::filesystem::path& rank_file) {
  std::ifstream in(rank_file);
  if (!in) throw ConfigError("cannot open tiktoken rank file: " + rank_file.string());
  std::vector<std::string> tokens;
  std::string b64;
  long rank;
  while (in >> b64 >> rank) {
    if (rank != static_cast<long>(tokens.size()))
      throw ConfigError("rank file is not dense at rank " + std::to_string(rank));
    tokens.push_back(base64_decode(b64));
  }
  if (tokens.empty()) throw ConfigError("empty rank file: " + rank_file.string());
  return std::shared_ptr<const TiktokenVocabulary>(new TiktokenVocabulary(std::move(tokens)));
}

const std::string& TiktokenVocabulary::token_bytes(int id) const {
  return tokens_.at(static_cast<std::size_t>(id));
}

// 's|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+
std::vector<std::string> TiktokenVocabulary::pretokenize(std::string_view text) const {
  const std::u32string s = decode_utf8(text);
  const std::size_t n = s.size();
  std::vector<std::string> pieces;
  auto emit = [&](std::size_t b, std::size_t e) {
    pieces.push_back(encode_utf8(std::u32string_view(s).substr(b, e - b)));
  };
  auto run = [&](std::size_t from, bool (*pred)(char32_t)) {
    while (from < n && pred(s[from])) ++from;
    return from;
  };

  std::size_t i = 0;
  while (i < n) {
    if (s[i] == U'\'' && i + 1 < n) {
      const char32_t a = s[i + 1];
      if (a == U's' || a == U't' || a == U'm' || a == U'd') {
        emit(i, i + 2);
        i += 2;
        continue;
      }
      if (i + 2 < n) {
        const char32_t b = s[i + 2];
        if ((a == U'r' && b == U'e') || (a == U'v' && b == U'e') || (a == U'l' && b == U'l')) {
          emit(i, i + 3);
          i += 3;
          continue;
        }
      }
    }
    bool matched = false;
    for (auto pred : {&is_letter, &is_number, &is_other}) {
      std::size_t start = i;
      if (s[i] == U' ' && i + 1 < n && pred(s[i + 1])) start = i + 1;
      if (!pred(s[start])) continue;
      const std::size_t end = run(start, pred);
      emit(i, end);
      i = end;
      matched = true;
      break;
    }
    if (matched) continue;
    const std::size_t end = run(i, &is_ws);
    if (end == n || end - i == 1) {
      emit(i, end);
      i = end;
    } else {
      emit(i, end - 1);  // leave one space to prefix the next word
      i = end - 1;
    }
  }
  return pieces;
}

void TiktokenVocabulary::bpe(const std::string& piece, std::vector<int>& out) const {
  if (auto it = ranks_.find(piece); it != ranks_.end()) {
    out.push_back(it->second);
    return;
  }
  // Part boundaries into `piece`; merge the lowest-ranked adjacent pair until
  // no adjacent pair is in the table.
  std::vector<std::size_t> bounds(piece.size() + 1);
  for (std::size_t i = 0; i <= piece.size(); ++i) bounds[i] = i;
  constexpr int kNone = std::numeric_limits<int>::max();
  auto pair_rank = [&](std::size_t k) {
    if (k + 2 >= bounds.size()) return kNone;
    const auto it = ranks_.find(piece.substr(bounds[k], bounds[k + 2] - bounds[k]));
    return it == ranks_.end() ? kNone : it->second;
  };
  while (bounds.size() > 2) {
    int best = kNone;
    std::size_t best_k = 0;
    for (std::size_t k = 0; k + 2 < bounds.size(); ++k) {
      const int r = pair_rank(k);
      if (r < best) {
        best = r;
        best_k = k;
      }
    }
    if (best == kNone) break;
    bounds.erase(bounds.begin() + static_cast<std::ptrdiff_t>(best_k) + 1);
  }
  for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
    const auto it = ranks_.find(piece.substr(bounds[k], bounds[k + 1] - bounds[k]));
    if (it == ranks_.end()) throw RuntimeFailure("byte missing from BPE ranks");
    out.push_back(it->second);
  }
}

std::vector<int> TiktokenVocabulary::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& piece : pretokenize(text)) bpe(piece, ids);
  return ids;
}

std::shared_ptr<const Vocabulary> make_vocabulary(std::string_view spec) {
  if (spec == "byte") return std::make_shared<ByteVocabulary>();
  if (spec == "tiktoken") return TiktokenVocabulary::load(TiktokenVocabulary::default_rank_file());
  if (spec.starts_with("tiktoken:")) return TiktokenVocabulary::load(std::string(spec.substr(9)));
  throw ConfigError("unknown vocabulary '" + std::string(spec) + "' (expected byte or tiktoken[:path])");
}

}  // namespace csw::text

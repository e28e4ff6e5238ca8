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
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace csw::text {

/// Whisper's language codes in token order; the multilingual vocabulary
/// carries the first 99.
inline constexpr std::array<std::string_view, 99> kLanguageCodes = {
    "en", "zh", "de", "es", "ru", "ko", "fr", "ja", "pt", "tr", "pl", "ca", "nl", "ar", "sv",
    "it", "id", "hi", "fi", "vi", "he", "uk", "el", "ms", "cs", "ro", "da", "hu", "ta", "no",
    "th", "ur", "hr", "bg", "lt", "la", "mi", "ml", "cy", "sk", "te", "fa", "lv", "bn", "sr",
    "az", "sl", "kn", "et", "mk", "br", "eu", "is", "hy", "ne", "mn", "bs", "kk", "sq", "sw",
    "gl", "mr", "pa", "si", "km", "sn", "yo", "so", "af", "oc", "ka", "be", "tg", "sd", "gu",
    "am", "yi", "lo", "uz", "fo", "ht", "ps", "tk", "nn", "mt", "sa", "lb", "my", "bo", "tl",
    "mg", "as", "tt", "haw", "ln", "ha", "ba", "jw", "su"};

/// Token table shared by the model, prompt builder and decoder. Text tokens
/// occupy [0, text_size()); special tokens follow in Whisper's layout:
/// endoftext, startoftranscript, 99 languages, translate, transcribe,
/// startoflm, startofprev, nospeech, notimestamps, then optional timestamps.
class Vocabulary {
 public:
  virtual ~Vocabulary() = default;

  virtual std::string kind() const = 0;
  virtual std::vector<int> encode(std::string_view text) const = 0;
  /// Raw bytes of a text token.
  virtual const std::string& token_bytes(int id) const = 0;

  int text_size() const { return text_size_; }
  int size() const { return size_; }

  /// Concatenated bytes of the text tokens in `ids`; special tokens are skipped.
  std::string decode(std::span<const int> ids) const;

  int eot() const { return text_size_; }
  int sot() const { return text_size_ + 1; }
  int translate() const { return first_language() + kNumLanguages; }
  int transcribe() const { return translate() + 1; }
  int sot_lm() const { return translate() + 2; }
  int sot_prev() const { return translate() + 3; }
  int no_speech() const { return translate() + 4; }
  int no_timestamps() const { return translate() + 5; }

  std::optional<int> language_token(std::string_view code) const;
  std::optional<std::string_view> language_of(int id) const;
  bool is_language(int id) const { return id >= first_language() && id < translate(); }
  std::vector<int> language_token_ids() const;
  bool is_special(int id) const { return id >= text_size_; }
  bool contains(int id) const { return id >= 0 && id < size_; }

  /// "<|startoftranscript|>", "<|en|>", "<|0.02|>", or the token's bytes.
  std::string token_label(int id) const;
  /// Inverse of token_label for special tokens.
  std::optional<int> special_from_label(std::string_view label) const;

  static constexpr int kNumLanguages = static_cast<int>(kLanguageCodes.size());
  static constexpr int kNumTimestamps = 1501;

 protected:
  Vocabulary(int text_size, bool with_timestamps);

 private:
  int first_language() const { return text_size_ + 2; }

  int text_size_;
  int size_;
};

/// 256 byte tokens plus the special block, without timestamp tokens. Small
/// enough for desk-scale models.
class ByteVocabulary final : public Vocabulary {
 public:
  ByteVocabulary();
  std::string kind() const override { return "byte"; }
  std::vector<int> encode(std::string_view text) const override;
  const std::string& token_bytes(int id) const override;

 private:
  std::vector<std::string> bytes_;
};

/// Whisper's multilingual byte-level BPE (the `.tiktoken` rank file) with
/// the GPT-2 pre-tokenizer. 51865 ids in total.
class TiktokenVocabulary final : public Vocabulary {
 public:
  static std::shared_ptr<const TiktokenVocabulary> load(const std::filesystem::path& rank_file);
  static std::filesystem::path default_rank_file();

  std::string kind() const override { return "tiktoken"; }
  std::vector<int> encode(std::string_view text) const override;
  const std::string& token_bytes(int id) const override;

  /// Pre-tokenizer split, exposed for tests.
  std::vector<std::string> pretokenize(std::string_view text) const;

 private:
  explicit TiktokenVocabulary(std::vector<std::string> tokens);
  void bpe(const std::string& piece, std::vector<int>& out) const;

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ranks_;
};

/// "byte", "tiktoken" (bundled rank file) or "tiktoken:<path>".
std::shared_ptr<const Vocabulary> make_vocabulary(std::string_view spec);

}  // namespace csw::text

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

#include "cswhisper/scoring/mixed_text.hpp"

#include <unicode/uchar.h>
#include <unicode/uscript.h>

#include "cswhisper/text/utf8.hpp"

namespace csw::scoring {

namespace {

bool is_latin_letter(char32_t cp) {
  if (!u_isalpha(static_cast<UChar32>(cp))) return false;
  UErrorCode status = U_ZERO_ERROR;
  return uscript_getScript(static_cast<UChar32>(cp), &status) == USCRIPT_LATIN &&
         U_SUCCESS(status);
}

bool is_digit(char32_t cp) { return u_isdigit(static_cast<UChar32>(cp)) != 0; }

bool is_word_char(char32_t cp) { return is_latin_letter(cp) || is_digit(cp); }

bool is_space(char32_t cp) { return u_isUWhiteSpace(static_cast<UChar32>(cp)) != 0; }

char32_t fold_width(char32_t cp) {
  if (cp >= 0xFF01 && cp <= 0xFF5E) return cp - 0xFEE0;
  if (cp == 0x3000) return U' ';
  return cp;
}

// Drops <...> and [...] spans. An unmatched opener is left for the
// punctuation pass.
std::u32string drop_markers(const std::u32string& in) {
  std::u32string out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const char32_t c = in[i];
    if (c == U'<' || c == U'[') {
      const char32_t close = c == U'<' ? U'>' : U']';
      const auto end = in.find(close, i + 1);
      if (end != std::u32string::npos) {
        out.push_back(U' ');
        i = end;
        continue;
      }
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace

const char* to_string(TokenClass klass) {
  switch (klass) {
    case TokenClass::kHan: return "han";
    case TokenClass::kLatin: return "latin";
    case TokenClass::kOther: return "other";
  }
  return "other";
}

bool is_han(char32_t cp) {
  UErrorCode status = U_ZERO_ERROR;
  return uscript_getScript(static_cast<UChar32>(cp), &status) == USCRIPT_HAN &&
         U_SUCCESS(status);
}

std::string normalize_text(std::string_view raw) {
  std::u32string cps = text::decode_utf8(raw);
  for (auto& c : cps) {
    c = fold_width(c);
    if (c == U'‘' || c == U'’') c = U'\'';
  }
  cps = drop_markers(cps);

  std::u32string cleaned;
  cleaned.reserve(cps.size());
  for (std::size_t i = 0; i < cps.size(); ++i) {
    char32_t c = cps[i];
    if (c == U'\'') {
      const bool inner = i > 0 && i + 1 < cps.size() && is_word_char(cps[i - 1]) &&
                         is_word_char(cps[i + 1]);
      cleaned.push_back(inner ? c : U' ');
      continue;
    }
    if (u_ispunct(static_cast<UChar32>(c))) {
      cleaned.push_back(U' ');
      continue;
    }
    if (is_latin_letter(c)) c = static_cast<char32_t>(u_tolower(static_cast<UChar32>(c)));
    cleaned.push_back(c);
  }

  std::u32string out;
  out.reserve(cleaned.size());
  bool pending_space = false;
  for (char32_t c : cleaned) {
    if (is_space(c) || u_iscntrl(static_cast<UChar32>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(U' ');
    pending_space = false;
    out.push_back(c);
  }
  return text::encode_utf8(out);
}

std::vector<MixedToken> mixed_tokenize(std::string_view normalized) {
  const std::u32string cps = text::decode_utf8(normalized);
  std::vector<MixedToken> tokens;
  std::u32string word;
  auto flush_word = [&] {
    if (!word.empty()) {
      tokens.push_back({text::encode_utf8(word), TokenClass::kLatin});
      word.clear();
    }
  };
  for (char32_t c : cps) {
    if (is_word_char(c) || (c == U'\'' && !word.empty())) {
      word.push_back(c);
      continue;
    }
    flush_word();
    if (is_space(c)) continue;
    std::string surface;
    text::append_utf8(surface, c);
    tokens.push_back({std::move(surface), is_han(c) ? TokenClass::kHan : TokenClass::kOther});
  }
  flush_word();
  return tokens;
}

std::string join_tokens(const std::vector<MixedToken>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0 && tokens[i].klass == TokenClass::kLatin &&
        tokens[i - 1].klass == TokenClass::kLatin)
      out.push_back(' ');
    out += tokens[i].surface;
  }
  return out;
}

}  // namespace csw::scoring

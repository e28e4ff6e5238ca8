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

#include <string>
#include <string_view>
#include <vector>

namespace csw::scoring {

/// Scoring unit classes for Mandarin-English text: one Han character, one
/// Latin word (letters, digits, inner apostrophes), or any other symbol.
enum class TokenClass { kHan, kLatin, kOther };

const char* to_string(TokenClass klass);

struct MixedToken {
  std::string surface;
  TokenClass klass = TokenClass::kOther;

  friend bool operator==(const MixedToken&, const MixedToken&) = default;
};

/// Canonical text form used before scoring:
///  - full-width ASCII and the ideographic space are folded to half width
///  - bracketed non-lexical markers such as `<noise>` or `[laugh]` are dropped
///  - Latin letters are lowercased
///  - punctuation (ASCII and CJK) becomes whitespace, except apostrophes
///    between two word characters ("don't")
///  - whitespace runs collapse to one space, ends trimmed
/// normalize_text(normalize_text(x)) == normalize_text(x).
std::string normalize_text(std::string_view raw);

/// Splits normalized text into scoring units. Han characters need no
/// surrounding whitespace: "我们go" is three tokens.
std::vector<MixedToken> mixed_tokenize(std::string_view normalized);

/// Inverse of mixed_tokenize up to whitespace: Latin words are separated by
/// one space, everything else is concatenated.
std::string join_tokens(const std::vector<MixedToken>& tokens);

bool is_han(char32_t cp);

}  // namespace csw::scoring

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

#include <doctest.h>

#include <random>

#include "cswhisper/common/error.hpp"
#include "cswhisper/scoring/align.hpp"
#include "cswhisper/scoring/mer.hpp"
#include "cswhisper/scoring/mixed_text.hpp"
#include "edit_oracle.hpp"

using namespace csw::scoring;

namespace {

std::vector<MixedToken> symbols(const std::vector<int>& s) {
  std::vector<MixedToken> out;
  for (int x : s) out.push_back({std::string(1, static_cast<char>('a' + x)), TokenClass::kLatin});
  return out;
}

std::vector<std::string> surfaces(const std::vector<MixedToken>& toks) {
  std::vector<std::string> out;
  for (const auto& t : toks) out.push_back(t.surface);
  return out;
}

// Alignment steps must replay into both sequences.
void check_consistent(const std::vector<AlignmentStep>& steps, const std::vector<MixedToken>& ref,
                      const std::vector<MixedToken>& hyp) {
  std::vector<MixedToken> r, h;
  for (const auto& s : steps) {
    switch (s.op) {
      case EditOp::kMatch:
        REQUIRE(*s.ref == *s.hyp);
        r.push_back(*s.ref);
        h.push_back(*s.hyp);
        break;
      case EditOp::kSubstitute:
        REQUIRE(!(*s.ref == *s.hyp));
        r.push_back(*s.ref);
        h.push_back(*s.hyp);
        break;
      case EditOp::kDelete:
        REQUIRE(!s.hyp);
        r.push_back(*s.ref);
        break;
      case EditOp::kInsert:
        REQUIRE(!s.ref);
        h.push_back(*s.hyp);
        break;
    }
  }
  REQUIRE(r == ref);
  REQUIRE(h == hyp);
}

}  // namespace

TEST_CASE("normalize_text") {
  CHECK(normalize_text("Hello， 世界!") == "hello 世界");
  CHECK(normalize_text("ＡＢＣ") == "abc");
  CHECK(normalize_text("hello 世界") == "hello 世界");
  CHECK(normalize_text("Don't  STOP。") == "don't stop");
  CHECK(normalize_text("'quoted' words") == "quoted words");
  CHECK(normalize_text("<noise> 我们 [laughter] go") == "我们 go");
  CHECK(normalize_text("  \t ") == "");
  CHECK(normalize_text("“你好”、世界？") == "你好 世界");
  CHECK(normalize_text("Ｏｋ　好") == "ok 好");
}

TEST_CASE("normalize_text is idempotent") {
  const char* samples[] = {"Hello， 世界!", "'a' b'c' 'd", "ＡＢＣ１２３", "x<y", "[a b", "我們ＯＫ吗？？",
                           "it’s   fine", "tab\tsep\nline", "$5 + 3%", "ÉCOLE école"};
  for (const char* s : samples) {
    const auto once = normalize_text(s);
    CHECK(normalize_text(once) == once);
  }
}

TEST_CASE("mixed_tokenize") {
  const auto t = mixed_tokenize("我们go there吗");
  CHECK(surfaces(t) == std::vector<std::string>{"我", "们", "go", "there", "吗"});
  CHECK(t[0].klass == TokenClass::kHan);
  CHECK(t[2].klass == TokenClass::kLatin);
  CHECK(mixed_tokenize("").empty());
  const auto d = mixed_tokenize("abc123 你好");
  CHECK(surfaces(d) == std::vector<std::string>{"abc123", "你", "好"});
  CHECK(d[0].klass == TokenClass::kLatin);
  const auto o = mixed_tokenize("a $ b");
  REQUIRE(o.size() == 3);
  CHECK(o[1].klass == TokenClass::kOther);
  CHECK(surfaces(mixed_tokenize("don't")) == std::vector<std::string>{"don't"});
}

TEST_CASE("join_tokens then re-tokenize is the identity on token lists") {
  const char* samples[] = {"我们go there吗", "abc123 你好", "a $ b", "x 我 y z 你", "café 好 naïve"};
  for (const char* s : samples) {
    const auto toks = mixed_tokenize(normalize_text(s));
    CHECK(mixed_tokenize(join_tokens(toks)) == toks);
  }
}

TEST_CASE("align basic cases") {
  const auto ref = symbols({0, 1, 2, 3, 0});
  auto steps = align(ref, ref);
  CHECK(steps.size() == 5);
  CHECK(error_count(steps) == 0);

  auto hyp = ref;
  hyp[2] = symbols({3})[0];
  steps = align(ref, hyp);
  int matches = 0, subs = 0;
  for (const auto& s : steps) {
    matches += s.op == EditOp::kMatch;
    subs += s.op == EditOp::kSubstitute;
  }
  CHECK(matches == 4);
  CHECK(subs == 1);

  steps = align({}, symbols({1, 2}));
  REQUIRE(steps.size() == 2);
  CHECK(steps[0].op == EditOp::kInsert);
}

TEST_CASE("align tie-break prefers substitution over delete+insert and delete over insert") {
  // ref "a b", hyp "b c": optimal cost 2 via two substitutions or via delete a /
  // match b / insert c. Backtrace from the end: (b vs c) substitute wins first.
  auto steps = align(symbols({0, 1}), symbols({1, 2}));
  REQUIRE(error_count(steps) == 2);
  CHECK(steps.back().op == EditOp::kSubstitute);

  // ref "a", hyp "b a"? cost 1 either way; backtrace at (1,2): match a/a first.
  steps = align(symbols({0}), symbols({1, 0}));
  REQUIRE(steps.size() == 2);
  CHECK(steps[0].op == EditOp::kInsert);
  CHECK(steps[1].op == EditOp::kMatch);

  // Deterministic across calls.
  const auto a = symbols({0, 1, 2, 1, 0});
  const auto b = symbols({2, 1, 0, 0});
  const auto s1 = align(a, b);
  const auto s2 = align(a, b);
  REQUIRE(s1.size() == s2.size());
  for (std::size_t i = 0; i < s1.size(); ++i) CHECK(s1[i].op == s2[i].op);
}

TEST_CASE("align distance equals the brute-force recursive oracle on random short pairs") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 400; ++trial) {
    std::vector<int> a(rng() % 7), b(rng() % 7);
    for (auto& x : a) x = static_cast<int>(rng() % 4);
    for (auto& x : b) x = static_cast<int>(rng() % 4);
    const auto ta = symbols(a), tb = symbols(b);
    const auto steps = align(ta, tb);
    const int want = csw::testing::brute_force_edit_distance(a, 0, b, 0);
    REQUIRE(error_count(steps) == static_cast<std::size_t>(want));
    REQUIRE(edit_distance(ta, tb) == static_cast<std::size_t>(want));
    check_consistent(steps, ta, tb);
  }
}

TEST_CASE("align distance equals BFS over all sequences up to length 8") {
  const csw::testing::SequenceSpace space(4, 8);
  for (const auto& source : {std::vector<int>{}, {0, 1, 2, 3, 0}, {2, 2, 1}}) {
    const auto dist = space.distances_from(source);
    const auto ref = symbols(source);
    for (std::int64_t i = 0; i < space.size(); ++i) {
      const auto hyp = symbols(space.sequence(i));
      REQUIRE(error_count(align(ref, hyp)) == static_cast<std::size_t>(dist[i]));
    }
  }
}

TEST_CASE("metric sanity: symmetry with deletions and insertions swapped, triangle inequality") {
  std::mt19937 rng(5);
  auto rand_seq = [&] {
    std::vector<int> s(rng() % 9);
    for (auto& x : s) x = static_cast<int>(rng() % 4);
    return symbols(s);
  };
  for (int trial = 0; trial < 300; ++trial) {
    const auto a = rand_seq(), b = rand_seq(), c = rand_seq();
    const auto ab = compute_mer(align(a, b), a.size());
    const auto ba = compute_mer(align(b, a), b.size());
    CHECK(ab.counts.errors() == ba.counts.errors());
    CHECK(ab.counts.deletions + ab.counts.substitutions + ab.counts.insertions ==
          ba.counts.insertions + ba.counts.substitutions + ba.counts.deletions);
    CHECK(edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c));
    CHECK(edit_distance(a, a) == 0);
  }
}

TEST_CASE("compute_mer") {
  const auto ref = mixed_tokenize("我 们 go 吗");
  auto r = compute_mer(align(ref, ref), ref.size());
  REQUIRE(r.mer);
  CHECK(*r.mer == 0.0);

  r = compute_mer(align(ref, {}), ref.size());
  CHECK(*r.mer == 100.0);
  CHECK(r.counts.deletions == 4);

  auto longer = ref;
  for (const auto& t : mixed_tokenize("x y z")) longer.push_back(t);
  r = compute_mer(align(ref, longer), ref.size());
  CHECK(r.counts.insertions == 3);
  CHECK(*r.mer == doctest::Approx(75.0));

  // Insertion-heavy: 2 reference tokens, 7 hypothesis tokens -> > 100%.
  const auto two = mixed_tokenize("好 ok");
  r = compute_mer(align(two, mixed_tokenize("a b c d e f 好")), two.size());
  CHECK(*r.mer > 100.0);

  // Empty reference: undefined rate, insertions still counted.
  r = compute_mer(align({}, mixed_tokenize("a b")), 0);
  CHECK_FALSE(r.mer.has_value());
  CHECK(r.counts.insertions == 2);

  CHECK_THROWS_AS(compute_mer(align(ref, ref), 3), std::invalid_argument);
}

TEST_CASE("per-class breakdown charges sub/del to the reference class and ins to the hypothesis class") {
  const auto s = score_pair({"u", "我们 go", "我 went there"});
  // ref: 我 们 go ; hyp: 我 went there
  const auto& han = s.report.per_class[static_cast<int>(TokenClass::kHan)];
  const auto& lat = s.report.per_class[static_cast<int>(TokenClass::kLatin)];
  CHECK(han.n_ref == 2);
  CHECK(lat.n_ref == 1);
  CHECK(s.report.counts.errors() == 2);
  CHECK(han.errors() + lat.errors() == 2);
}

TEST_CASE("aggregate sums counts") {
  auto make = [](std::size_t errors, std::size_t n) {
    MerReport r;
    r.utterances = 1;
    r.counts.n_ref = n;
    r.counts.substitutions = errors;
    r.mer = 100.0 * errors / n;
    return r;
  };
  std::vector<MerReport> one{make(2, 8)};
  auto c = aggregate(one);
  CHECK(c.counts == one[0].counts);
  CHECK(*c.mer == *one[0].mer);

  std::vector<MerReport> two{make(1, 10), make(3, 10)};
  CHECK(*aggregate(two).mer == doctest::Approx(20.0));

  std::vector<MerReport> uneven{make(1, 2), make(0, 98)};
  CHECK(*aggregate(uneven).mer == doctest::Approx(1.0));

  MerReport empty;
  empty.utterances = 1;
  std::vector<MerReport> zeros{empty};
  CHECK_THROWS_AS(aggregate(zeros), csw::ConfigError);
}

TEST_CASE("parallel corpus scoring matches the serial reference") {
  std::vector<TextPair> pairs;
  for (int i = 0; i < 200; ++i)
    pairs.push_back({"u" + std::to_string(i), "我们 go there 吗 " + std::to_string(i),
                     i % 3 ? "我 go where 吗" : "完全 different text"});
  const auto par = score_pairs(pairs);
  const auto ser = serial::score_pairs(pairs);
  REQUIRE(par.size() == ser.size());
  for (std::size_t i = 0; i < par.size(); ++i) {
    CHECK(par[i].report.counts == ser[i].report.counts);
    CHECK(par[i].report.utt_id == ser[i].report.utt_id);
  }
}

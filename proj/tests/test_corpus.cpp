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

#include <algorithm>
#include <random>
#include <set>

#include "cswhisper/audio/wav.hpp"
#include "cswhisper/common/error.hpp"
#include "cswhisper/common/files.hpp"
#include "cswhisper/corpus/manifest.hpp"
#include "test_support.hpp"

using namespace csw::corpus;

namespace {

UtteranceRecord rec(std::string id, double dur, std::string text = "我们 go", std::string split = "train") {
  UtteranceRecord r;
  r.utt_id = std::move(id);
  r.audio = "wav/" + r.utt_id + ".wav";
  r.duration = dur;
  r.text = std::move(text);
  r.split = std::move(split);
  return r;
}

CorpusManifest uniform(int n, double dur) {
  std::vector<UtteranceRecord> rs;
  for (int i = 0; i < n; ++i) rs.push_back(rec("u" + std::to_string(i), dur));
  return CorpusManifest("uniform", rs);
}

std::set<std::string> ids(const CorpusManifest& m) {
  std::set<std::string> out;
  for (const auto& r : m.records()) out.insert(r.utt_id);
  return out;
}

}  // namespace

TEST_CASE("parse a well-formed manifest") {
  const std::string text =
      R"({"utt_id":"a","audio":"a.wav","duration":1.5,"text":"我们 go","split":"train"})" "\n"
      R"({"utt_id":"b","audio":"b.wav","duration":2.25,"text":"hello 世界","split":"Dev_Man","speaker":"s1"})" "\n"
      R"({"utt_id":"c","audio":"/abs/c.wav","duration":0.25,"text":"ok","split":"test"})" "\n";
  const auto m = parse_manifest(text, "demo", "/data");
  CHECK(m.size() == 3);
  CHECK(m.total_duration() == doctest::Approx(4.0));
  CHECK(m.max_duration() == 2.25);
  CHECK(m.find("b")->extra["speaker"] == "s1");
  CHECK(m.resolve_audio(*m.find("a")) == std::filesystem::path("/data/a.wav"));
  CHECK(m.resolve_audio(*m.find("c")) == std::filesystem::path("/abs/c.wav"));
  CHECK(m.filter_split("Dev_Man").size() == 1);
  CHECK(m.find("zzz") == nullptr);
}

TEST_CASE("manifest errors name the line or id") {
  auto msg = [](const std::string& text) {
    try {
      parse_manifest(text, "x");
    } catch (const csw::ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  const std::string good = R"({"utt_id":"u1","audio":"a","duration":1,"text":"hi","split":"train"})";
  CHECK(msg(good + "\n" + good).find("duplicate utt_id: u1") != std::string::npos);
  CHECK(msg(good + "\n{not json").find("line 2") != std::string::npos);
  CHECK(msg(R"({"utt_id":"u","duration":1,"text":"hi","split":"train"})").find("missing field 'audio'") !=
        std::string::npos);
  CHECK(msg(R"({"utt_id":"u","audio":"a","duration":0,"text":"hi","split":"train"})") != "no error");
  CHECK(msg(R"({"utt_id":"u","audio":"a","duration":1,"text":"[noise] ，","split":"train"})")
            .find("empty after normalization") != std::string::npos);
  CHECK(msg("\n\n" + good + "\n\n") == "no error");
  CHECK_THROWS_AS(CorpusManifest("x", {rec("a", 1), rec("a", 2)}), csw::ConfigError);
  CHECK_THROWS_AS(CorpusManifest("x", {rec("a", -1)}), csw::ConfigError);
  CHECK_THROWS_AS(load_manifest("/nonexistent/manifest.jsonl"), csw::ConfigError);
}

TEST_CASE("load, serialize, load round trip keeps unknown keys") {
  csw::testing::TempDir dir("manifest");
  std::vector<UtteranceRecord> rs{rec("a", 1.25), rec("b", 3.0, "混合 code switch", "dev")};
  rs[1].extra["speaker"] = "spk7";
  rs[1].extra["tags"] = {1, 2};
  const CorpusManifest m("rt", rs, dir.path());
  save_manifest(dir.path() / "rt.jsonl", m);
  const auto back = load_manifest(dir.path() / "rt.jsonl");
  CHECK(back == m);
  CHECK(back.fingerprint() == m.fingerprint());
  CHECK(serialize_manifest(back) == serialize_manifest(m));
  CHECK(back.base_dir() == dir.path());
}

TEST_CASE("total duration mirrors the SEAME train split of 93.6 hours") {
  // 93.6 h spread over utterances of uneven length.
  std::vector<UtteranceRecord> rs;
  const double total = 93.6 * 3600.0;
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> ud(1.0, 9.0);
  double acc = 0.0;
  int i = 0;
  while (total - acc > 9.0) {
    const double d = ud(rng);
    rs.push_back(rec("t" + std::to_string(i++), d));
    acc += d;
  }
  rs.push_back(rec("t" + std::to_string(i++), total - acc));
  const CorpusManifest m("seame_train", rs);
  CHECK(m.total_hours() == doctest::Approx(93.6).epsilon(1e-9));
  CHECK(std::abs(m.total_duration() - total) < 1e-6 * rs.size());
}

TEST_CASE("subset_by_duration examples") {
  const auto m = uniform(100, 36.0);
  const auto s = subset_by_duration(m, 0.1, 7);
  CHECK(s.size() == 10);
  CHECK(ids(subset_by_duration(m, 0.1, 7)) == ids(s));
  const auto full = subset_by_duration(m, m.total_hours(), 3);
  CHECK(ids(full) == ids(m));
  CHECK_THROWS_AS(subset_by_duration(m, m.total_hours() + 0.01, 3), csw::ConfigError);
  CHECK_THROWS_AS(subset_by_duration(m, 0.0, 3), csw::ConfigError);
  // Manifest order preserved.
  for (std::size_t i = 1; i < s.size(); ++i) {
    const auto a = std::stoi(s.records()[i - 1].utt_id.substr(1));
    const auto b = std::stoi(s.records()[i].utt_id.substr(1));
    CHECK(a < b);
  }
}

TEST_CASE("subset totals stay within one utterance of the target, and subsets nest") {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    std::uniform_real_distribution<double> ud(0.2, 30.0);
    std::vector<UtteranceRecord> rs;
    const int n = 5 + static_cast<int>(rng() % 200);
    for (int i = 0; i < n; ++i) rs.push_back(rec("r" + std::to_string(i), ud(rng)));
    const CorpusManifest m("rand", rs);
    const std::uint64_t seed = rng();
    std::uniform_real_distribution<double> frac(0.01, 1.0);
    std::vector<double> targets{frac(rng), frac(rng), frac(rng)};
    std::sort(targets.begin(), targets.end());
    std::set<std::string> previous;
    for (double f : targets) {
      const double target = f * m.total_hours();
      const auto s = subset_by_duration(m, target, seed);
      CHECK(s.total_duration() >= target * 3600.0 - 1e-6);
      CHECK(s.total_duration() < target * 3600.0 + m.max_duration());
      const auto cur = ids(s);
      CHECK(std::includes(cur.begin(), cur.end(), previous.begin(), previous.end()));
      previous = cur;
    }
  }
}

TEST_CASE("language tag stats") {
  CorpusManifest man("m", {rec("a", 1, "我们都在")});
  auto st = language_tag_stats(man);
  CHECK(st.latin_token_count == 0);
  CHECK(*st.han_ratio == 1.0);

  st = language_tag_stats(CorpusManifest("m", {rec("a", 1, "我们 go")}));
  CHECK(st.han_token_count == 2);
  CHECK(st.latin_token_count == 1);
  CHECK(*st.han_ratio == doctest::Approx(2.0 / 3.0));

  // Only reachable through the constructor; parsing rejects such text.
  st = language_tag_stats(CorpusManifest("m", {rec("a", 1, "<noise>")}));
  CHECK(st.han_token_count + st.latin_token_count + st.other_token_count == 0);
  CHECK_FALSE(st.han_ratio.has_value());

  const auto sum = summarize(CorpusManifest("m", {rec("a", 3600, "我们 go"), rec("b", 1800, "ok", "dev")}));
  CHECK(sum.at("train").hours == doctest::Approx(1.0));
  CHECK(sum.at("dev").utterances == 1);
  CHECK(*sum.at("dev").tags.han_ratio == 0.0);
}

TEST_CASE("verify_durations compares against wav headers") {
  csw::testing::TempDir dir("verify");
  std::filesystem::create_directories(dir.path() / "wav");
  csw::audio::Waveform w;
  w.samples.assign(8000, 0.1f);
  csw::audio::write_wav(dir.path() / "wav/a.wav", w);
  csw::audio::write_wav(dir.path() / "wav/b.wav", w);
  const CorpusManifest m("v", {rec("a", 0.5), rec("b", 0.9), rec("c", 1.0)}, dir.path());
  const auto bad = verify_durations(m);
  REQUIRE(bad.size() == 2);
  CHECK(bad[0].utt_id == "b");
  CHECK(*bad[0].audio_seconds == doctest::Approx(0.5));
  CHECK(bad[1].utt_id == "c");
  CHECK_FALSE(bad[1].audio_seconds.has_value());
}

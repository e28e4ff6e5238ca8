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
#include "cswhisper/prompt/prompt.hpp"

using namespace csw::prompt;
using csw::nn::EncoderDecoderModel;

namespace {

csw::nn::ModelConfig tiny(const std::string& vocab = "byte") {
  csw::nn::ModelConfig c;
  c.vocabulary = vocab;
  c.n_audio_frames = 20;
  c.d_model = 16;
  c.n_heads = 2;
  c.n_encoder_layers = 1;
  c.n_decoder_layers = 1;
  c.d_ff = 32;
  c.n_text_ctx = 16;
  return c;
}

bool has(const std::vector<Diagnostic>& d, const std::string& msg) {
  for (const auto& x : d)
    if (x.message == msg) return true;
  return false;
}

}  // namespace

TEST_CASE("prompt sequences for every strategy") {
  auto m = EncoderDecoderModel::initialize(tiny(), 1);
  const auto& v = m.vocabulary();
  install_fused_embedding(m, {});
  auto seq = [&](const PromptStrategy& s) {
    const auto p = build_prompt_sequence(s, v, m.fused_tokens());
    return render(p.token_ids, v, m.fused_tokens());
  };
  CHECK(seq(PromptStrategy::official("en")) == "<|sot|><|en|><|asr|>");
  CHECK(seq(PromptStrategy::official("zh")) == "<|sot|><|zh|><|asr|>");
  CHECK(seq(PromptStrategy::automatic()) == "<|sot|>");
  CHECK(seq(PromptStrategy::combined("en", "zh")) == "<|sot|><|en|><|zh|><|asr|>");
  CHECK(seq(PromptStrategy::combined("zh", "en")) == "<|sot|><|zh|><|en|><|asr|>");
  CHECK(seq(PromptStrategy::fusion()) == "<|sot|><|en-zh|><|asr|>");
  CHECK(seq(PromptStrategy::reference("ru")) == "<|sot|><|en-zh|><|asr|>");  // slot now carries the fusion

  const auto ids = build_prompt_sequence(PromptStrategy::fusion(), v, m.fused_tokens()).token_ids;
  CHECK(ids == std::vector<int>{v.sot(), *v.language_token("ru"), v.transcribe()});
  const auto nt = build_prompt_sequence(PromptStrategy::official("zh"), v, {}, true);
  CHECK(nt.token_ids.size() == 3);
  CHECK(nt.decoder_prefix(v).back() == v.no_timestamps());
}

TEST_CASE("sequence shape property") {
  auto m = EncoderDecoderModel::initialize(tiny(), 1);
  const auto& v = m.vocabulary();
  install_fused_embedding(m, {});
  const std::vector<std::pair<PromptStrategy, std::size_t>> cases{
      {PromptStrategy::official("de"), 3}, {PromptStrategy::automatic(), 1},
      {PromptStrategy::combined("ja", "ko"), 4}, {PromptStrategy::fusion(), 3},
      {PromptStrategy::reference("fr"), 3}};
  for (const auto& [s, len] : cases) {
    for (bool nt : {false, true}) {
      const auto p = build_prompt_sequence(s, v, m.fused_tokens(), nt);
      CHECK(p.token_ids.size() == len);
      CHECK(p.token_ids.front() == v.sot());
      if (len > 1) CHECK(p.token_ids.back() == v.transcribe());
    }
  }
}

TEST_CASE("prompt errors") {
  csw::text::ByteVocabulary v;
  CHECK_THROWS_AS(build_prompt_sequence(PromptStrategy::fusion(), v), csw::ConfigError);
  CHECK_THROWS_AS(build_prompt_sequence(PromptStrategy::official("xx"), v), csw::ConfigError);
  CHECK_THROWS_AS(build_prompt_sequence(PromptStrategy::combined("en", "en"), v), csw::ConfigError);
}

TEST_CASE("validate_strategy diagnostics") {
  CHECK(has(validate_strategy(PromptStrategy::combined("en", "en")), "languages must be distinct"));
  FusedEmbeddingSpec f;
  f.weights = {0.7, 0.7};
  CHECK(has(validate_strategy(PromptStrategy::fusion(f)), "weights must sum to 1"));
  CHECK(validate_strategy(PromptStrategy::official("zh")).empty());
  f = {};
  f.slot = "en";
  CHECK(has(validate_strategy(PromptStrategy::fusion(f)), "slot must differ from every source language"));
  f = {};
  f.weights = {1.2, -0.2};
  CHECK(has(validate_strategy(PromptStrategy::fusion(f)), "weights must be nonnegative"));
  f = {};
  f.weights = {1.0};
  CHECK(has(validate_strategy(PromptStrategy::fusion(f)), "one weight per source language required"));
  csw::text::ByteVocabulary v;
  CHECK(has(validate_strategy(PromptStrategy::official("klingon"), &v), "unknown language 'klingon'"));
  CHECK(validate_strategy(PromptStrategy::official("klingon")).empty());
}

TEST_CASE("strategy parsing and json") {
  CHECK(PromptStrategy::parse("official:zh") == PromptStrategy::official("zh"));
  CHECK(PromptStrategy::parse("auto") == PromptStrategy::automatic());
  CHECK(PromptStrategy::parse("combined:en,zh") == PromptStrategy::combined("en", "zh"));
  CHECK(PromptStrategy::parse("fused") == PromptStrategy::fusion());
  CHECK(PromptStrategy::parse("fused:en,zh") == PromptStrategy::fusion());
  CHECK(PromptStrategy::parse("reference:ru") == PromptStrategy::reference("ru"));
  CHECK_THROWS_AS(PromptStrategy::parse("official"), csw::ConfigError);
  CHECK_THROWS_AS(PromptStrategy::parse("beam:5"), csw::ConfigError);
  for (const auto& s : {PromptStrategy::official("en"), PromptStrategy::automatic(),
                        PromptStrategy::combined("zh", "en"), PromptStrategy::fusion(),
                        PromptStrategy::reference("ru")})
    CHECK(PromptStrategy::from_json(s.to_json()) == s);
  const auto j = nlohmann::json::parse(
      R"({"kind":"fused","sources":["en","zh"],"weights":[0.5,0.5],"slot":"ru","label":"en-zh"})");
  CHECK(PromptStrategy::from_json(j) == PromptStrategy::fusion());
  CHECK(PromptStrategy::combined("en", "zh").symbol() == "<|en|><|zh|>");
  CHECK(PromptStrategy::fusion().slug() == "fused-en-zh");
}

TEST_CASE("build_fused_embedding") {
  auto m = EncoderDecoderModel::initialize(tiny(), 2);
  const auto& v = m.vocabulary();
  const auto table = m.token_embedding_table();
  const int en = *v.language_token("en"), zh = *v.language_token("zh");
  ResolvedFusion f{{en, zh}, {1.0, 0.0}, *v.language_token("ru"), "x"};
  const auto copy = build_fused_embedding(table, f);
  CHECK(std::equal(copy.begin(), copy.end(), table.row(en).begin()));

  f.weights = {0.5, 0.5};
  const auto mean = build_fused_embedding(table, f);
  for (int c = 0; c < table.cols; ++c) {
    const float oracle = static_cast<float>(0.5 * double(table.row(en)[c]) + 0.5 * double(table.row(zh)[c]));
    CHECK(mean[c] == oracle);
  }

  f.source_tokens = {en, en};
  const auto same = build_fused_embedding(table, f);
  CHECK(std::equal(same.begin(), same.end(), table.row(en).begin()));

  // Linearity in the weights.
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    const double a = u(rng), p = u(rng), q = u(rng);
    ResolvedFusion f1{{en, zh}, {p, 1 - p}, 0, "a"}, f2{{en, zh}, {q, 1 - q}, 0, "b"};
    ResolvedFusion mix{{en, zh}, {a * p + (1 - a) * q, 1 - (a * p + (1 - a) * q)}, 0, "m"};
    const auto o1 = build_fused_embedding(table, f1), o2 = build_fused_embedding(table, f2);
    const auto om = build_fused_embedding(table, mix);
    for (int c = 0; c < table.cols; ++c)
      CHECK(om[c] == doctest::Approx(a * o1[c] + (1 - a) * o2[c]).epsilon(1e-6).scale(std::abs(o1[c]) + std::abs(o2[c])));
  }
  f.source_tokens = {en, 99999};
  CHECK_THROWS_AS(build_fused_embedding(table, f), csw::ConfigError);
}

TEST_CASE("install touches one row, is idempotent, and can be undone") {
  auto m = EncoderDecoderModel::initialize(tiny(), 3);
  const auto& v = m.vocabulary();
  const auto original = m.snapshot();
  const auto before = row_checksums(m.token_embedding_table());
  const auto receipt = install_fused_embedding(m, {});
  const auto after = row_checksums(m.token_embedding_table());
  const int ru = *v.language_token("ru");
  int changed = 0;
  for (std::size_t r = 0; r < before.size(); ++r) changed += before[r] != after[r];
  CHECK(changed == 1);
  CHECK(before[ru] != after[ru]);
  CHECK(receipt.previous_checksum == before[ru]);
  CHECK(m.fused_token("en-zh") == ru);

  const auto snap1 = m.snapshot();
  install_fused_embedding(m, {});
  CHECK(m.snapshot() == snap1);

  undo_install(m, receipt);
  CHECK(m.snapshot() == original);
  CHECK_FALSE(m.fused_token("en-zh").has_value());

  FusedEmbeddingSpec bad;
  bad.slot = "zh";
  CHECK_THROWS_AS(install_fused_embedding(m, bad), csw::ConfigError);
  m.set_embedding_read_only(true);
  CHECK_THROWS_AS(install_fused_embedding(m, {}), csw::RuntimeFailure);
  CHECK(m.snapshot() == original);
}

TEST_CASE("install on the full multilingual token layout") {
  auto m = EncoderDecoderModel::initialize(tiny("tiktoken"), 5);
  const auto table = m.token_embedding_table();
  CHECK(table.rows == 51865);
  std::vector<float> en(table.row(50259).begin(), table.row(50259).end());
  std::vector<float> zh(table.row(50260).begin(), table.row(50260).end());
  const auto r = install_fused_embedding(m, {});
  CHECK(r.slot_token == 50263);
  const auto row = m.token_embedding_table().row(50263);
  for (int c = 0; c < table.cols; ++c) CHECK(row[c] == doctest::Approx(0.5f * en[c] + 0.5f * zh[c]).epsilon(1e-6));
}

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

#include <cmath>
#include <random>

#include "cswhisper/common/error.hpp"
#include "cswhisper/nn/model.hpp"
#include "cswhisper/nn/ops.hpp"
#include "test_support.hpp"

using namespace csw::nn;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.n_audio_frames = 20;
  c.d_model = 32;
  c.n_heads = 2;
  c.n_encoder_layers = 1;
  c.n_decoder_layers = 1;
  c.d_ff = 64;
  c.n_text_ctx = 16;
  return c;
}

csw::audio::FeatureMatrix features(int frames, int seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> nd(0.0f, 0.5f);
  csw::audio::FeatureMatrix fm;
  fm.frames = frames;
  fm.n_mels = 80;
  fm.data.resize(static_cast<std::size_t>(frames) * 80);
  for (auto& v : fm.data) v = nd(rng);
  return fm;
}

}  // namespace

TEST_CASE("config validation and json round trip") {
  auto c = tiny();
  CHECK_NOTHROW(c.validate());
  CHECK(ModelConfig::from_json(c.to_json()).to_json() == c.to_json());
  c.n_audio_frames = 21;
  CHECK_THROWS_AS(c.validate(), csw::ConfigError);
  c = tiny();
  c.d_model = 30;  // not divisible by heads? 30 / 2 ok, so break heads instead
  c.n_heads = 4;
  CHECK_THROWS_AS(c.validate(), csw::ConfigError);
  c = tiny();
  c.vocabulary = "nope";
  CHECK_THROWS(EncoderDecoderModel::initialize(c, 1));
}

TEST_CASE("initialization is seeded and parameters are grouped") {
  const auto a = EncoderDecoderModel::initialize(tiny(), 5);
  const auto b = EncoderDecoderModel::initialize(tiny(), 5);
  const auto c = EncoderDecoderModel::initialize(tiny(), 6);
  CHECK(a.snapshot() == b.snapshot());
  CHECK_FALSE(a.snapshot() == c.snapshot());
  int enc = 0, dec = 0, emb = 0;
  for (const auto& p : a.parameters()) {
    CHECK(p.group == group_of(p.name));
    enc += p.group == ParameterGroup::kEncoder;
    dec += p.group == ParameterGroup::kDecoder;
    emb += p.group == ParameterGroup::kEmbedding;
  }
  CHECK(enc > 0);
  CHECK(dec > 0);
  CHECK(emb == 1);
  CHECK(group_of("encoder.blocks.0.mlp.fc1.weight") == ParameterGroup::kEncoder);
  CHECK(group_of("decoder.positional_embedding") == ParameterGroup::kDecoder);
  CHECK(group_of("token_embedding.weight") == ParameterGroup::kEmbedding);
}

TEST_CASE("forward shapes and next-token consistency") {
  const auto m = EncoderDecoderModel::initialize(tiny(), 2);
  const auto enc = m.encode(features(20, 1), Precision::kFull);
  CHECK(enc.rows() == 10);
  CHECK(enc.cols() == 32);
  const auto& v = m.vocabulary();
  const std::vector<int> prefix{v.sot(), *v.language_token("zh"), v.transcribe(), 'a'};
  const auto lg = m.logits(enc, prefix, Precision::kFull);
  CHECK(lg.rows() == 4);
  CHECK(lg.cols() == v.size());
  const auto next = m.next_token_logits(enc, prefix);
  REQUIRE(next.size() == static_cast<std::size_t>(v.size()));
  for (int i = 0; i < v.size(); i += 17) CHECK(next[i] == doctest::Approx(lg.values()[3 * v.size() + i]));
  // Causality: earlier positions do not depend on later tokens.
  auto other = prefix;
  other[3] = 'b';
  const auto lg2 = m.logits(enc, other, Precision::kFull);
  for (int i = 0; i < 3 * v.size(); i += 13) CHECK(lg.values()[i] == lg2.values()[i]);
  // Mixed precision stays close to full precision.
  const auto lm = m.logits(m.encode(features(20, 1), Precision::kMixed), prefix, Precision::kMixed);
  double worst = 0;
  for (std::size_t i = 0; i < lm.numel(); ++i)
    worst = std::max(worst, double(std::abs(lm.values()[i] - lg.values()[i])));
  CHECK(worst < 0.05);
  CHECK_THROWS(m.encode(features(22, 1), Precision::kFull));
  std::vector<int> too_long(17, 'a');
  CHECK_THROWS(m.logits(enc, too_long, Precision::kFull));
}

TEST_CASE("tied embedding edits show up in the logits") {
  auto m = EncoderDecoderModel::initialize(tiny(), 3);
  const auto enc = m.encode(features(20, 2), Precision::kFull);
  const auto& v = m.vocabulary();
  const std::vector<int> prefix{v.sot()};
  const auto before = m.next_token_logits(enc, prefix);
  auto table = m.token_embedding_table();
  CHECK(table.tied_output);
  CHECK(table.rows == v.size());
  const int ru = *v.language_token("ru");
  for (float& x : table.row(ru)) x *= 3.0f;
  const auto after = m.next_token_logits(enc, prefix);
  CHECK(after[ru] == doctest::Approx(3.0f * before[ru]).epsilon(1e-4));
  CHECK(after[ru + 1] == before[ru + 1]);
  m.set_embedding_read_only(true);
  CHECK(m.token_embedding_table().read_only);
}

TEST_CASE("save, load and clone") {
  csw::testing::TempDir dir("model");
  auto m = EncoderDecoderModel::initialize(tiny(), 4);
  m.record_fused_token({"en-zh", 262, {258, 259}, {0.5, 0.5}});
  m.save(dir.path());
  const auto back = EncoderDecoderModel::load(dir.path());
  CHECK(back.snapshot() == m.snapshot());
  CHECK(back.config().to_json() == m.config().to_json());
  CHECK(back.fused_token("en-zh") == 262);
  auto c = m.clone();
  c.parameter("token_embedding.weight").values()[0] += 1.0f;
  CHECK_FALSE(c.snapshot() == m.snapshot());
  m.forget_fused_token(262);
  CHECK_FALSE(m.fused_token("en-zh").has_value());
  CHECK_THROWS(EncoderDecoderModel::load(dir.path() / "missing"));
  auto snap = m.snapshot();
  snap.arrays.pop_back();
  CHECK_THROWS(m.restore(snap));
}

TEST_CASE("snapshot file round trip and corruption") {
  csw::testing::TempDir dir("snap");
  ParameterSnapshot s;
  s.arrays.push_back({"a", 2, 2, {1, 2, 3, 4}});
  s.arrays.push_back({"b.c", 1, 3, {-1, 0.5f, 1e-7f}});
  save_snapshot(dir.path() / "p.bin", s);
  CHECK(load_snapshot(dir.path() / "p.bin") == s);
  CHECK(s.find("b.c")->cols == 3);
  CHECK(s.arrays[0].checksum() != s.arrays[1].checksum());
  std::filesystem::resize_file(dir.path() / "p.bin", 20);
  CHECK_THROWS(load_snapshot(dir.path() / "p.bin"));
}

TEST_CASE("a few gradient steps reduce the loss") {
  auto m = EncoderDecoderModel::initialize(tiny(), 9);
  const auto fm = features(20, 4);
  const auto& v = m.vocabulary();
  const std::vector<int> tokens{v.sot(), *v.language_token("zh"), v.transcribe(), 'h', 'i'};
  const std::vector<int> targets{-1, -1, 'h', 'i', v.eot()};
  auto loss_fn = [&] {
    return cross_entropy_sum(m.logits(m.encode(fm, Precision::kFull), tokens, Precision::kFull), targets, 1.0f);
  };
  const float first = loss_fn().item();
  for (int step = 0; step < 20; ++step) {
    for (auto& p : m.parameters()) p.tensor.zero_grad();
    backward(loss_fn());
    for (auto& p : m.parameters())
      if (p.tensor.has_grad())
        for (std::size_t i = 0; i < p.tensor.numel(); ++i) p.tensor.values()[i] -= 0.01f * p.tensor.grad()[i];
  }
  CHECK(loss_fn().item() < 0.5f * first);
}

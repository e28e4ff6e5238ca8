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
#include <filesystem>
#include <random>

#include "cswhisper/adapt/finetune.hpp"
#include "cswhisper/common/error.hpp"
#include "cswhisper/common/files.hpp"
#include "cswhisper/nn/ops.hpp"
#include "synthetic_examples.hpp"
#include "test_support.hpp"

using namespace csw::adapt;
using csw::nn::EncoderDecoderModel;
using csw::prompt::PromptStrategy;

namespace {

TrainingConfig small_recipe(int steps) {
  TrainingConfig c;
  c.micro_batch = 2;
  c.grad_accum = 2;
  c.peak_lr = 3e-3;
  c.warmup_steps = 2;
  c.max_steps = steps;
  c.mixed_precision = false;
  c.seed = 1;
  return c;
}

std::map<std::string, std::string> checksums(const EncoderDecoderModel& m) {
  std::map<std::string, std::string> out;
  for (const auto& a : m.snapshot().arrays) out[a.name] = a.checksum();
  return out;
}

}  // namespace

TEST_CASE("recipe constants") {
  const TrainingConfig c;
  CHECK(c.micro_batch == 6);
  CHECK(c.grad_accum == 12);
  CHECK(c.effective_batch() == 72);
  CHECK(c.peak_lr == 1e-5);
  CHECK(c.warmup_steps == 200);
  CHECK(c.max_steps == 30000);
  CHECK(c.ablation().max_steps == 8000);
  CHECK(c.mixed_precision);
  CHECK_FALSE(c.freeze_encoder);
  CHECK(lr_at(0, c) == 0.0);
  CHECK(lr_at(200, c) == 1e-5);
  CHECK(lr_at(100, c) == doctest::Approx(5e-6));
  CHECK(lr_at(15100, c) == doctest::Approx(1e-5 * (30000.0 - 15100.0) / (30000.0 - 200.0)).epsilon(1e-12));
  CHECK(lr_at(30000, c) == 0.0);
  CHECK_THROWS_AS(lr_at(-1, c), csw::ConfigError);
  CHECK_THROWS_AS(lr_at(30001, c), csw::ConfigError);
}

TEST_CASE("schedule is continuous, piecewise linear and peaks at the end of warmup") {
  TrainingConfig c;
  c.warmup_steps = 37;
  c.max_steps = 500;
  double best = -1;
  int arg = -1;
  for (int s = 0; s <= c.max_steps; ++s) {
    const double lr = lr_at(s, c);
    if (lr > best) {
      best = lr;
      arg = s;
    }
    if (s > 0) CHECK(std::abs(lr - lr_at(s - 1, c)) <= c.peak_lr / c.warmup_steps + 1e-18);
    if (s > 1 && s != c.warmup_steps + 1 && s != c.warmup_steps) {
      const double d1 = lr - lr_at(s - 1, c), d0 = lr_at(s - 1, c) - lr_at(s - 2, c);
      CHECK(d1 == doctest::Approx(d0).epsilon(1e-9).scale(1e-15));
    }
  }
  CHECK(arg == 37);
  CHECK(best == c.peak_lr);
}

TEST_CASE("training config validation and json") {
  TrainingConfig c;
  c.seed = 42;
  c.freeze_encoder = true;
  CHECK(TrainingConfig::from_json(c.to_json()).to_json() == c.to_json());
  c.warmup_steps = c.max_steps;
  CHECK_THROWS_AS(c.validate(), csw::ConfigError);
  c = {};
  c.peak_lr = 0;
  CHECK_THROWS_AS(c.validate(), csw::ConfigError);
  CHECK_THROWS_AS(TrainingConfig::from_json(nlohmann::json{{"learning_rate", 1}}), csw::ConfigError);
  CHECK(TrainingConfig::from_json(nlohmann::json{{"max_steps", 10}, {"warmup_steps", 2}}).max_steps == 10);
}

TEST_CASE("partition, freeze and unfreeze") {
  auto m = EncoderDecoderModel::initialize(csw::testing::tiny_model_config(), 1);
  const auto part = ParameterPartition::of(m);
  CHECK_NOTHROW(part.check(m));
  std::size_t enc = 0, rest = 0;
  for (const auto& p : m.parameters())
    (p.group == csw::nn::ParameterGroup::kEncoder ? enc : rest) += p.tensor.numel();
  const auto all = trainable_parameter_count(m);
  CHECK(all == enc + rest);
  freeze_encoder(m, part);
  CHECK(trainable_parameter_count(m) == rest);
  unfreeze_encoder(m, part);
  CHECK(trainable_parameter_count(m) == all);

  auto broken = part;
  broken.decoder.push_back(broken.encoder.front());
  CHECK_THROWS_AS(broken.check(m), csw::ConfigError);
  broken = part;
  broken.embedding.clear();
  CHECK_THROWS_AS(freeze_encoder(m, broken), csw::ConfigError);

  // Frozen step: no gradient reaches the encoder.
  freeze_encoder(m, part);
  const auto ex = csw::testing::synthetic_examples(1, 20, 3);
  const auto& v = m.vocabulary();
  const std::vector<int> prompt{v.sot(), *v.language_token("en"), v.transcribe()};
  const auto tf = teacher_forcing(prompt, ex[0].text_tokens, v, m.text_context(), false);
  csw::nn::backward(example_loss(m, ex[0], tf, csw::nn::Precision::kFull, 1.0f));
  for (const auto& p : m.parameters()) {
    if (p.group == csw::nn::ParameterGroup::kEncoder) {
      CHECK_FALSE(p.tensor.has_grad());
    }
  }
  CHECK(m.parameter("decoder.ln.weight").has_grad());
}

TEST_CASE("teacher forcing masks the prompt") {
  csw::text::ByteVocabulary v;
  const std::vector<int> prompt{v.sot(), *v.language_token("en"), *v.language_token("zh"), v.transcribe()};
  const std::vector<int> text{'h', 'i'};
  auto tf = teacher_forcing(prompt, text, v, 32, false);
  CHECK(tf.inputs == std::vector<int>{v.sot(), 258, 259, v.transcribe(), 'h', 'i'});
  CHECK(tf.targets == std::vector<int>{-1, -1, -1, 'h', 'i', v.eot()});
  CHECK(tf.target_count() == 3);
  tf = teacher_forcing(prompt, text, v, 32, true);
  CHECK(tf.targets == std::vector<int>{258, 259, -1, 'h', 'i', v.eot()});
  tf = teacher_forcing(prompt, std::vector<int>(50, 'a'), v, 10, false);
  CHECK(tf.inputs.size() == 10);
  CHECK(tf.targets.size() == 10);
  CHECK(tf.targets.back() == v.eot());
}

TEST_CASE("prompt positions contribute nothing to the loss") {
  csw::text::ByteVocabulary v;
  const std::vector<int> prompt{v.sot(), *v.language_token("zh"), v.transcribe()};
  const std::vector<int> text{'a', 'b'};
  const auto tf = teacher_forcing(prompt, text, v, 32, false);
  std::mt19937 rng(2);
  std::normal_distribution<float> nd;
  std::vector<float> logits(tf.inputs.size() * v.size());
  for (auto& x : logits) x = nd(rng);
  const auto base = csw::nn::cross_entropy_sum(
      csw::nn::Tensor::from_values(static_cast<int>(tf.inputs.size()), v.size(), logits), tf.targets, 1.0f);
  for (std::size_t r = 0; r < tf.targets.size(); ++r)
    if (tf.targets[r] < 0)
      for (int c = 0; c < v.size(); ++c) logits[r * v.size() + c] += 10.0f * nd(rng);
  const auto perturbed = csw::nn::cross_entropy_sum(
      csw::nn::Tensor::from_values(static_cast<int>(tf.inputs.size()), v.size(), logits), tf.targets, 1.0f);
  CHECK(base.item() == perturbed.item());
}

TEST_CASE("checkpoint averaging") {
  csw::nn::ParameterSnapshot s;
  s.arrays.push_back({"w", 2, 3, {1, -2, 3.5f, 1e-7f, 0, 7}});
  s.arrays.push_back({"b", 1, 2, {0.1f, 0.2f}});
  const std::vector<csw::nn::ParameterSnapshot> same(5, s);
  CHECK(average_checkpoints(same, 5) == s);
  CHECK(average_checkpoints(same, 3) == s);

  auto a = s, b = s;
  a.arrays[0].data[0] = 1.0f;
  b.arrays[0].data[0] = 3.0f;
  const std::vector<csw::nn::ParameterSnapshot> two{a, b};
  CHECK(average_checkpoints(two, 2).arrays[0].data[0] == 2.0f);

  std::mt19937 rng(8);
  std::normal_distribution<float> nd;
  std::vector<csw::nn::ParameterSnapshot> three(3, s);
  for (auto& snap : three)
    for (auto& arr : snap.arrays)
      for (auto& x : arr.data) x = nd(rng);
  const auto avg = average_checkpoints(three, 3);
  for (std::size_t k = 0; k < s.arrays.size(); ++k)
    for (std::size_t i = 0; i < s.arrays[k].data.size(); ++i) {
      double sum = 0;
      for (int j = 0; j < 3; ++j) sum += three[j].arrays[k].data[i];
      CHECK(avg.arrays[k].data[i] == doctest::Approx(sum / 3).epsilon(1e-7));
    }

  // Only the most recent k count.
  std::vector<csw::nn::ParameterSnapshot> seq{a, b, s, s};
  CHECK(average_checkpoints(seq, 2) == s);

  CHECK_THROWS_AS(average_checkpoints(two, 0), csw::ConfigError);
  CHECK_THROWS_AS(average_checkpoints(two, 3), csw::ConfigError);
  auto odd = s;
  odd.arrays[1].cols = 1;
  odd.arrays[1].data.pop_back();
  const std::vector<csw::nn::ParameterSnapshot> mixed{s, odd};
  CHECK_THROWS_AS(average_checkpoints(mixed, 2), csw::ConfigError);
}

TEST_CASE("loss scaler") {
  LossScaler s(1024, 3);
  CHECK(s.update(true));
  CHECK(s.update(true));
  CHECK(s.scale() == 1024);
  CHECK(s.update(true));
  CHECK(s.scale() == 2048);
  CHECK_FALSE(s.update(false));
  CHECK(s.scale() == 1024);
  CHECK(s.skipped() == 1);
}

TEST_CASE("AdamW first step matches the closed form") {
  TrainingConfig c;
  c.weight_decay = 0.1;
  std::vector<csw::nn::Parameter> params{{"w", csw::nn::ParameterGroup::kDecoder,
                                          csw::nn::Tensor::parameter(1, 2, {1.0f, -2.0f})}};
  params[0].tensor.grad()[0] = 0.5f;
  params[0].tensor.grad()[1] = -4.0f;
  AdamW opt(c);
  opt.step(params, 0.01);
  // First bias-corrected step is sign(g) * g / (|g| + eps) ~= sign(g).
  CHECK(params[0].tensor.values()[0] == doctest::Approx(1.0 - 0.01 * (1.0 + 0.1 * 1.0)).epsilon(1e-6));
  CHECK(params[0].tensor.values()[1] == doctest::Approx(-2.0 - 0.01 * (-1.0 + 0.1 * -2.0)).epsilon(1e-6));
  CHECK(opt.steps_taken() == 1);
}

TEST_CASE("accumulation equivalence: the split of the effective batch does not change the update") {
  const auto ex = csw::testing::synthetic_examples(12, 20, 4);
  auto run = [&](int micro, int accum) {
    auto m = EncoderDecoderModel::initialize(csw::testing::tiny_model_config(), 5);
    auto c = small_recipe(3);
    c.micro_batch = micro;
    c.grad_accum = accum;
    finetune(m, ex, PromptStrategy::official("en"), c);
    return m.snapshot();
  };
  const auto a = run(6, 2), b = run(12, 1), d = run(1, 12);
  for (std::size_t k = 0; k < a.arrays.size(); ++k)
    for (std::size_t i = 0; i < a.arrays[k].data.size(); ++i) {
      REQUIRE(a.arrays[k].data[i] == doctest::Approx(b.arrays[k].data[i]).epsilon(1e-5).scale(1e-6));
      REQUIRE(a.arrays[k].data[i] == doctest::Approx(d.arrays[k].data[i]).epsilon(1e-5).scale(1e-6));
    }
}

TEST_CASE("fine-tuning reduces loss and checkpoints at epoch boundaries") {
  const auto ex = csw::testing::synthetic_examples(6, 20, 6);
  auto m = EncoderDecoderModel::initialize(csw::testing::tiny_model_config(), 7);
  auto c = small_recipe(10);  // 4 examples per update, 6 per epoch
  const auto r = finetune(m, ex, PromptStrategy::combined("zh", "en"), c);
  CHECK(r.final_loss < r.initial_loss);
  REQUIRE(r.steps.size() == 10);
  CHECK(r.steps[0].lr == lr_at(1, c));
  // Epoch ends after examples 6, 12, ... -> updates 2, 3, 5, 6, 8, 9, plus the last.
  std::vector<int> steps;
  for (const auto& cp : r.checkpoints.checkpoints) steps.push_back(cp.step);
  CHECK(steps == std::vector<int>{2, 3, 5, 6, 8, 9, 10});
  CHECK(r.checkpoints.checkpoints.back().epoch == 6);
  CHECK(r.checkpoints.load(r.checkpoints.checkpoints.back()) == m.snapshot());
  CHECK(r.checkpoints.load_last(5).size() == 5);
}

TEST_CASE("keep_last prunes old checkpoints without changing training") {
  csw::testing::TempDir dir("keep");
  const auto ex = csw::testing::synthetic_examples(6, 20, 6);
  auto a = EncoderDecoderModel::initialize(csw::testing::tiny_model_config(), 7);
  auto b = a.clone();
  const auto c = small_recipe(10);
  FinetuneOptions opt;
  opt.run_dir = dir.path();
  opt.keep_last = 3;
  const auto kept = finetune(a, ex, PromptStrategy::official("zh"), c, opt);
  FinetuneOptions mem;
  mem.keep_last = 3;
  const auto in_memory = finetune(b, ex, PromptStrategy::official("zh"), c, mem);
  std::vector<int> steps;
  for (const auto& cp : kept.checkpoints.checkpoints) steps.push_back(cp.step);
  CHECK(steps == std::vector<int>{8, 9, 10});
  CHECK(in_memory.checkpoints.in_memory.size() == 3);
  CHECK_FALSE(std::filesystem::exists(dir.path() / "ckpt-2"));
  CHECK(std::filesystem::exists(dir.path() / "ckpt-8" / "params.bin"));
  CHECK(a.snapshot() == b.snapshot());
  CHECK(kept.checkpoints.load_last(3) == in_memory.checkpoints.load_last(3));
  // the pruned run is still reusable
  auto again = EncoderDecoderModel::initialize(csw::testing::tiny_model_config(), 7);
  CHECK(finetune(again, ex, PromptStrategy::official("zh"), c, opt).reused);
}

TEST_CASE("run directory: reuse, mismatch and restart") {
  csw::testing::TempDir dir("run");
  const auto ex = csw::testing::synthetic_examples(4, 20, 9);
  const auto c = small_recipe(4);
  FinetuneOptions opt;
  opt.run_dir = dir.path() / "cell";
  opt.data_fingerprint = "data-a";

  auto m1 = EncoderDecoderModel::initialize(csw::testing::tiny_model_config(), 2);
  const auto first = finetune(m1, ex, PromptStrategy::official("zh"), c, opt);
  CHECK_FALSE(first.reused);
  CHECK(std::filesystem::exists(opt.run_dir / "metadata.json"));
  CHECK(std::filesystem::exists(opt.run_dir / "ckpt-4" / "params.bin"));

  auto m2 = EncoderDecoderModel::initialize(csw::testing::tiny_model_config(), 2);
  const auto again = finetune(m2, ex, PromptStrategy::official("zh"), c, opt);
  CHECK(again.reused);
  CHECK(m2.snapshot() == m1.snapshot());
  CHECK(again.final_loss == first.final_loss);
  CHECK(again.checkpoints.checkpoints.size() == first.checkpoints.checkpoints.size());

  auto m3 = EncoderDecoderModel::initialize(csw::testing::tiny_model_config(), 2);
  auto other = opt;
  other.data_fingerprint = "data-b";
  CHECK_THROWS_WITH_AS(finetune(m3, ex, PromptStrategy::official("zh"), c, other),
                       doctest::Contains("manifest fingerprint mismatch"), csw::ConfigError);

  // An unfinished run is discarded and retrained.
  auto meta = nlohmann::ordered_json::parse(csw::read_file(opt.run_dir / "metadata.json"));
  meta["completed"] = false;
  csw::write_file_atomic(opt.run_dir / "metadata.json", meta.dump());
  auto m4 = EncoderDecoderModel::initialize(csw::testing::tiny_model_config(), 2);
  const auto redo = finetune(m4, ex, PromptStrategy::official("zh"), c, opt);
  CHECK_FALSE(redo.reused);
  CHECK(m4.snapshot() == m1.snapshot());
}

TEST_CASE("frozen encoder stays bit-identical while the decoder moves") {
  const auto ex = csw::testing::synthetic_examples(10, 20, 10);
  auto m = EncoderDecoderModel::initialize(csw::testing::tiny_model_config(), 11);
  const auto before = checksums(m);
  auto c = small_recipe(8);
  c.freeze_encoder = true;
  finetune(m, ex, PromptStrategy::official("en"), c);
  const auto after = checksums(m);
  int decoder_changed = 0;
  for (const auto& p : m.parameters()) {
    if (p.group == csw::nn::ParameterGroup::kEncoder) {
      CHECK(before.at(p.name) == after.at(p.name));
    } else {
      decoder_changed += before.at(p.name) != after.at(p.name);
    }
  }
  CHECK(decoder_changed > 0);
  CHECK(m.parameter("encoder.ln_post.weight").requires_grad());  // restored afterwards
}

TEST_CASE("mixed precision: overflow skips updates and lowers the scale") {
  const auto ex = csw::testing::synthetic_examples(4, 20, 12);
  auto m = EncoderDecoderModel::initialize(csw::testing::tiny_model_config(), 13);
  auto c = small_recipe(6);
  c.mixed_precision = true;
  c.initial_loss_scale = 1e12;
  const auto r = finetune(m, ex, PromptStrategy::official("en"), c);
  CHECK(r.skipped_steps > 0);
  CHECK(r.steps.front().skipped);
  CHECK(r.steps.back().loss_scale < 1e12);
  CHECK(std::isfinite(r.final_loss));

  auto m2 = EncoderDecoderModel::initialize(csw::testing::tiny_model_config(), 13);
  c.initial_loss_scale = 1024;
  const auto r2 = finetune(m2, ex, PromptStrategy::official("en"), c);
  CHECK(r2.skipped_steps == 0);
  CHECK(r2.final_loss < r2.initial_loss);
}

TEST_CASE("finetune preconditions") {
  auto m = EncoderDecoderModel::initialize(csw::testing::tiny_model_config(), 1);
  const auto ex = csw::testing::synthetic_examples(2, 20, 1);
  CHECK_THROWS_AS(finetune(m, std::span<const TrainingExample>{}, PromptStrategy::official("en"), small_recipe(2)),
                  csw::ConfigError);
  CHECK_THROWS_AS(finetune(m, ex, PromptStrategy::automatic(), small_recipe(2)), csw::ConfigError);
  CHECK_THROWS_AS(finetune(m, ex, PromptStrategy::fusion(), small_recipe(2)), csw::ConfigError);
  auto bad = small_recipe(2);
  bad.warmup_steps = 5;
  CHECK_THROWS_AS(finetune(m, ex, PromptStrategy::official("en"), bad), csw::ConfigError);
}

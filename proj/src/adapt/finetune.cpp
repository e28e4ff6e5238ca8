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

#include "cswhisper/adapt/finetune.hpp"

#include <cmath>
#include <utility>

#include <spdlog/spdlog.h>

#include "cswhisper/audio/wav.hpp"
#include "cswhisper/common/error.hpp"
#include "cswhisper/common/files.hpp"
#include "cswhisper/common/hash.hpp"
#include "cswhisper/common/random.hpp"
#include "cswhisper/nn/ops.hpp"
#include "cswhisper/scoring/mixed_text.hpp"

namespace csw::adapt {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string training_text(const std::string& raw) { return scoring::normalize_text(raw); }

std::vector<TrainingExample> prepare_examples(const corpus::CorpusManifest& manifest,
                                              const nn::EncoderDecoderModel& model) {
  audio::FeatureConfig fc;
  fc.n_mels = model.config().n_mels;
  const audio::LogMelExtractor extractor(fc);
  const auto& records = manifest.records();
  std::vector<TrainingExample> out(records.size());
  std::vector<std::string> errors(records.size());
  const int n = static_cast<int>(records.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      const auto wave = audio::read_wav(manifest.resolve_audio(records[i]));
      out[i].utt_id = records[i].utt_id;
      out[i].features = extractor.extract(wave, model.input_frames());
      out[i].text_tokens = model.vocabulary().encode(training_text(records[i].text));
    } catch (const std::exception& e) {
      errors[i] = records[i].utt_id + ": " + e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw RuntimeFailure("cannot prepare training audio for " + e);
  return out;
}

std::size_t TeacherForcing::target_count() const {
  std::size_t n = 0;
  for (int t : targets) n += t >= 0;
  return n;
}

TeacherForcing teacher_forcing(std::span<const int> prompt, std::span<const int> text_tokens,
                               const text::Vocabulary& vocab, int text_context,
                               bool loss_on_language_tokens) {
  if (prompt.empty()) throw ConfigError("empty prompt");
  // inputs = prompt + text, targets = (prompt + text + eot) shifted by one.
  const std::size_t room = static_cast<std::size_t>(text_context) > prompt.size()
                               ? static_cast<std::size_t>(text_context) - prompt.size()
                               : 0;
  if (room == 0) throw ConfigError("prompt does not fit the text context");
  const std::size_t keep = std::min(text_tokens.size(), room);
  TeacherForcing tf;
  tf.inputs.assign(prompt.begin(), prompt.end());
  tf.inputs.insert(tf.inputs.end(), text_tokens.begin(), text_tokens.begin() + keep);
  for (std::size_t i = 1; i < prompt.size(); ++i)
    tf.targets.push_back(loss_on_language_tokens && vocab.is_language(prompt[i]) ? prompt[i] : -1);
  tf.targets.insert(tf.targets.end(), text_tokens.begin(), text_tokens.begin() + keep);
  tf.targets.push_back(vocab.eot());
  return tf;
}

nn::Tensor example_loss(const nn::EncoderDecoderModel& model, const TrainingExample& example,
                        const TeacherForcing& tf, nn::Precision precision, float scale) {
  const auto encoded = model.encode(example.features, precision);
  return nn::cross_entropy_sum(model.logits(encoded, tf.inputs, precision), tf.targets, scale);
}

double dataset_loss(const nn::EncoderDecoderModel& model, std::span<const TrainingExample> examples,
                    std::span<const int> prompt, bool loss_on_language_tokens) {
  std::vector<double> sums(examples.size());
  std::vector<std::size_t> counts(examples.size());
  const int n = static_cast<int>(examples.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    nn::NoGradGuard guard;
    const auto tf = teacher_forcing(prompt, examples[i].text_tokens, model.vocabulary(),
                                    model.text_context(), loss_on_language_tokens);
    sums[i] = example_loss(model, examples[i], tf, nn::Precision::kFull, 1.0f).item();
    counts[i] = tf.target_count();
  }
  double total = 0.0;
  std::size_t tokens = 0;
  for (int i = 0; i < n; ++i) {
    total += sums[i];
    tokens += counts[i];
  }
  return tokens ? total / static_cast<double>(tokens) : 0.0;
}

nn::ParameterSnapshot CheckpointSet::load(const CheckpointInfo& info) const {
  if (run_dir.empty()) {
    for (std::size_t i = 0; i < checkpoints.size(); ++i)
      if (checkpoints[i].step == info.step) return in_memory.at(i);
    throw RuntimeFailure("no in-memory checkpoint for step " + std::to_string(info.step));
  }
  return nn::load_snapshot(run_dir / info.path / "params.bin");
}

std::vector<nn::ParameterSnapshot> CheckpointSet::load_last(std::size_t k) const {
  if (k > checkpoints.size())
    throw ConfigError("asked for the last " + std::to_string(k) + " checkpoints but only " +
                      std::to_string(checkpoints.size()) + " exist");
  std::vector<nn::ParameterSnapshot> out;
  for (std::size_t i = checkpoints.size() - k; i < checkpoints.size(); ++i) out.push_back(load(checkpoints[i]));
  return out;
}

namespace {

constexpr const char* kMetadataFile = "metadata.json";

std::string parameters_checksum(const nn::EncoderDecoderModel& model) {
  Fnv1a64 h;
  for (const auto& p : model.parameters()) {
    h.update(p.name);
    h.update(std::span<const float>(p.tensor.values()));
  }
  return h.hex();
}

ordered_json fused_json(const nn::EncoderDecoderModel& model) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : model.fused_tokens())
    arr.push_back({{"label", r.label}, {"slot", r.slot_token}, {"sources", r.source_tokens}, {"weights", r.weights}});
  return arr;
}

ordered_json checkpoints_json(const std::vector<CheckpointInfo>& cps) {
  ordered_json arr = ordered_json::array();
  for (const auto& c : cps) arr.push_back({{"epoch", c.epoch}, {"step", c.step}, {"path", c.path}});
  return arr;
}

ordered_json steps_json(const std::vector<StepRecord>& steps) {
  ordered_json arr = ordered_json::array();
  for (const auto& s : steps) arr.push_back({s.step, s.lr, s.loss, s.loss_scale, s.skipped});
  return arr;
}

FinetuneResult from_metadata(const fs::path& dir, const ordered_json& meta) {
  FinetuneResult r;
  r.reused = true;
  r.checkpoints.run_dir = dir;
  r.checkpoints.metadata = meta;
  for (const auto& c : meta.at("checkpoints"))
    r.checkpoints.checkpoints.push_back({c.at("epoch").get<int>(), c.at("step").get<int>(), c.at("path").get<std::string>()});
  for (const auto& s : meta.at("steps"))
    r.steps.push_back({s[0].get<int>(), s[1].get<double>(), s[2].get<double>(), s[3].get<double>(), s[4].get<bool>()});
  r.initial_loss = meta.at("initial_loss").get<double>();
  r.final_loss = meta.at("final_loss").get<double>();
  r.skipped_steps = meta.at("skipped_steps").get<long>();
  return r;
}

// Restores encoder trainability when training leaves scope.
class FreezeScope {
 public:
  FreezeScope(nn::EncoderDecoderModel& model, bool freeze) : model_(model) {
    for (const auto& p : model.parameters()) previous_.push_back(p.tensor.requires_grad());
    if (freeze) freeze_encoder(model, ParameterPartition::of(model));
  }
  ~FreezeScope() {
    auto& params = model_.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i].tensor.set_requires_grad(previous_[i]);
      params[i].tensor.zero_grad();
    }
  }

 private:
  nn::EncoderDecoderModel& model_;
  std::vector<bool> previous_;
};

}  // namespace

FinetuneResult finetune(nn::EncoderDecoderModel& model, std::span<const TrainingExample> examples,
                        const prompt::PromptStrategy& strategy, const TrainingConfig& config,
                        const FinetuneOptions& options) {
  config.validate();
  if (examples.empty()) throw ConfigError("cannot fine-tune on an empty manifest");
  if (strategy.kind == prompt::StrategyKind::kAuto)
    throw ConfigError("the auto prompt has no fixed language token to train with; choose another strategy");
  const auto& vocab = model.vocabulary();
  const auto prompt = prompt::build_prompt_sequence(strategy, vocab, model.fused_tokens()).token_ids;

  std::vector<TeacherForcing> tfs;
  tfs.reserve(examples.size());
  for (const auto& ex : examples) {
    tfs.push_back(teacher_forcing(prompt, ex.text_tokens, vocab, model.text_context(),
                                  config.loss_on_language_tokens));
    if (tfs.back().inputs.size() < prompt.size() + ex.text_tokens.size())
      spdlog::warn("{}: transcript truncated to fit {} text positions", ex.utt_id, model.text_context());
  }

  ordered_json identity;
  identity["format"] = "cswhisper-run-1";
  identity["data_fingerprint"] = options.data_fingerprint;
  identity["examples"] = examples.size();
  identity["training"] = config.to_json();
  identity["strategy"] = strategy.to_json();
  identity["model"] = model.config().to_json();
  identity["fused_tokens"] = fused_json(model);
  identity["initial_parameters"] = parameters_checksum(model);
  const std::string fingerprint = to_hex(fnv1a64(identity.dump()));

  const fs::path dir = options.run_dir;
  if (!dir.empty() && fs::exists(dir / kMetadataFile)) {
    ordered_json meta;
    try {
      meta = ordered_json::parse(read_file(dir / kMetadataFile));
    } catch (const json::exception& e) {
      throw ConfigError("unreadable run metadata in " + dir.string() + ": " + e.what());
    }
    if (meta.value("data_fingerprint", std::string()) != options.data_fingerprint)
      throw ConfigError("manifest fingerprint mismatch: " + dir.string() + " was trained on different data");
    if (meta.value("fingerprint", std::string()) != fingerprint)
      throw ConfigError("run directory " + dir.string() + " belongs to a different configuration");
    if (meta.value("completed", false)) {
      auto result = from_metadata(dir, meta);
      if (result.checkpoints.checkpoints.empty()) throw ConfigError("completed run without checkpoints");
      model.restore(result.checkpoints.load(result.checkpoints.checkpoints.back()));
      spdlog::info("reusing completed run in {}", dir.string());
      return result;
    }
    spdlog::warn("discarding unfinished run in {}", dir.string());
    fs::remove_all(dir);
  }
  if (!dir.empty()) fs::create_directories(dir);

  FreezeScope freeze(model, config.freeze_encoder);
  const auto precision = config.mixed_precision ? nn::Precision::kMixed : nn::Precision::kFull;

  FinetuneResult result;
  result.checkpoints.run_dir = dir;
  result.initial_loss = dataset_loss(model, examples, prompt, config.loss_on_language_tokens);
  spdlog::info("fine-tuning {} examples, {} updates, initial loss {:.4f}", examples.size(),
               config.max_steps, result.initial_loss);

  ordered_json meta = identity;
  meta["fingerprint"] = fingerprint;
  meta["completed"] = false;
  auto write_meta = [&] {
    if (dir.empty()) return;
    meta["checkpoints"] = checkpoints_json(result.checkpoints.checkpoints);
    meta["steps"] = steps_json(result.steps);
    meta["initial_loss"] = result.initial_loss;
    meta["final_loss"] = result.final_loss;
    meta["skipped_steps"] = result.skipped_steps;
    write_file_atomic(dir / kMetadataFile, meta.dump(1) + "\n");
  };
  write_meta();

  auto save_checkpoint = [&](int epoch, int step) {
    CheckpointInfo info{epoch, step, "ckpt-" + std::to_string(step)};
    if (dir.empty()) {
      result.checkpoints.in_memory.push_back(model.snapshot());
    } else {
      const fs::path tmp = dir / (".tmp-" + info.path);
      fs::remove_all(tmp);
      fs::create_directories(tmp);
      nn::save_snapshot(tmp / "params.bin", model.snapshot());
      fs::remove_all(dir / info.path);
      fs::rename(tmp, dir / info.path);
    }
    auto& cps = result.checkpoints.checkpoints;
    cps.push_back(info);
    if (options.keep_last > 0 && cps.size() > options.keep_last) {
      const auto drop = cps.front();
      cps.erase(cps.begin());
      if (dir.empty()) {
        result.checkpoints.in_memory.erase(result.checkpoints.in_memory.begin());
        write_meta();
      } else {
        write_meta();  // metadata first, so it never names a missing checkpoint
        fs::remove_all(dir / drop.path);
      }
      return;
    }
    write_meta();
  };

  const std::uint64_t n = examples.size();
  const std::uint64_t batch = static_cast<std::uint64_t>(config.effective_batch());
  std::uint64_t cached_epoch = ~0ULL;
  std::vector<std::size_t> order;
  auto example_at = [&](std::uint64_t pos) {
    const std::uint64_t epoch = pos / n;
    if (epoch != cached_epoch) {
      order = seeded_permutation(n, config.seed * 0x9E3779B97F4A7C15ULL + epoch);
      cached_epoch = epoch;
    }
    return order[pos % n];
  };

  AdamW optimizer(config);
  LossScaler scaler(config.mixed_precision ? config.initial_loss_scale : 1.0, config.scale_growth_interval);
  auto& params = model.parameters();
  std::uint64_t pos = 0;
  std::uint64_t checkpointed_epochs = 0;
  std::vector<std::size_t> step_examples(batch);
  for (int step = 1; step <= config.max_steps; ++step) {
    std::size_t tokens = 0;
    for (std::uint64_t b = 0; b < batch; ++b) {
      step_examples[b] = example_at(pos + b);
      tokens += tfs[step_examples[b]].target_count();
    }
    pos += batch;
    const double scale = scaler.scale();
    const float weight = static_cast<float>(scale / static_cast<double>(tokens));
    zero_gradients(params);
    double loss = 0.0;
    // grad_accum micro-batches of micro_batch examples; gradients add up.
    for (int mb = 0; mb < config.grad_accum; ++mb) {
      for (int j = 0; j < config.micro_batch; ++j) {
        const std::size_t i = step_examples[static_cast<std::size_t>(mb) * config.micro_batch + j];
        const auto l = example_loss(model, examples[i], tfs[i], precision, weight);
        const double value = l.item() / scale;
        if (!std::isfinite(value)) {
          std::string ids;
          for (auto k : step_examples) ids += (ids.empty() ? "" : ",") + examples[k].utt_id;
          throw RuntimeFailure("non-finite loss at step " + std::to_string(step) + " (batch: " + ids + ")");
        }
        loss += value;
        nn::backward(l);
      }
    }
    const bool finite = gradients_finite(params);
    if (!finite && !config.mixed_precision)
      throw RuntimeFailure("non-finite gradients at step " + std::to_string(step));
    StepRecord rec{step, lr_at(step, config), loss, scale, false};
    if (scaler.update(finite)) {
      optimizer.step(params, rec.lr, 1.0 / scale);
    } else {
      rec.skipped = true;
      ++result.skipped_steps;
      spdlog::debug("step {}: gradient overflow at scale {}, skipped", step, scale);
    }
    result.steps.push_back(rec);
    if (options.on_step) options.on_step(rec);

    const std::uint64_t epochs_done = pos / n;
    if (epochs_done > checkpointed_epochs || step == config.max_steps) {
      checkpointed_epochs = epochs_done;
      save_checkpoint(static_cast<int>(epochs_done), step);
    }
  }
  zero_gradients(params);
  result.final_loss = dataset_loss(model, examples, prompt, config.loss_on_language_tokens);
  spdlog::info("final loss {:.4f} after {} updates ({} skipped)", result.final_loss, config.max_steps,
               result.skipped_steps);
  meta["completed"] = true;
  write_meta();
  result.checkpoints.metadata = meta;
  return result;
}

FinetuneResult finetune(nn::EncoderDecoderModel& model, const corpus::CorpusManifest& manifest,
                        const prompt::PromptStrategy& strategy, const TrainingConfig& config,
                        std::filesystem::path run_dir) {
  if (manifest.empty()) throw ConfigError("cannot fine-tune on an empty manifest");
  const auto examples = prepare_examples(manifest, model);
  FinetuneOptions options;
  options.run_dir = std::move(run_dir);
  options.data_fingerprint = manifest.fingerprint();
  return finetune(model, examples, strategy, config, options);
}

}  // namespace csw::adapt

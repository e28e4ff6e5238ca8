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

#include "cswhisper/adapt/recipe.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "cswhisper/common/error.hpp"

namespace csw::adapt {

using nlohmann::json;
using nlohmann::ordered_json;

TrainingConfig TrainingConfig::ablation() const {
  TrainingConfig c = *this;
  c.max_steps = kAblationMaxSteps;
  return c;
}

void TrainingConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("training config: " + m); };
  if (micro_batch <= 0) fail("micro_batch must be positive");
  if (grad_accum <= 0) fail("grad_accum must be positive");
  if (!(peak_lr > 0.0)) fail("peak_lr must be positive");
  if (warmup_steps < 0) fail("warmup_steps must be nonnegative");
  if (max_steps <= 0) fail("max_steps must be positive");
  if (warmup_steps >= max_steps) fail("warmup_steps must be below max_steps");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) fail("betas must lie in [0, 1)");
  if (!(adam_eps > 0)) fail("adam_eps must be positive");
  if (!(weight_decay >= 0)) fail("weight_decay must be nonnegative");
  if (!(initial_loss_scale >= 1)) fail("initial_loss_scale must be at least 1");
  if (scale_growth_interval <= 0) fail("scale_growth_interval must be positive");
}

ordered_json TrainingConfig::to_json() const {
  return {{"micro_batch", micro_batch},
          {"grad_accum", grad_accum},
          {"peak_lr", peak_lr},
          {"warmup_steps", warmup_steps},
          {"max_steps", max_steps},
          {"mixed_precision", mixed_precision},
          {"freeze_encoder", freeze_encoder},
          {"seed", seed},
          {"beta1", beta1},
          {"beta2", beta2},
          {"adam_eps", adam_eps},
          {"weight_decay", weight_decay},
          {"initial_loss_scale", initial_loss_scale},
          {"scale_growth_interval", scale_growth_interval},
          {"loss_on_language_tokens", loss_on_language_tokens}};
}

TrainingConfig TrainingConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("training config must be an object");
  TrainingConfig c;
  static const std::set<std::string> known{
      "micro_batch", "grad_accum", "peak_lr", "warmup_steps", "max_steps",
      "mixed_precision", "freeze_encoder", "seed", "beta1", "beta2", "adam_eps",
      "weight_decay", "initial_loss_scale", "scale_growth_interval", "loss_on_language_tokens"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("training config: unknown key '" + it.key() + "'");
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j[key].get<std::remove_reference_t<decltype(field)>>();
    };
    get("micro_batch", c.micro_batch);
    get("grad_accum", c.grad_accum);
    get("peak_lr", c.peak_lr);
    get("warmup_steps", c.warmup_steps);
    get("max_steps", c.max_steps);
    get("mixed_precision", c.mixed_precision);
    get("freeze_encoder", c.freeze_encoder);
    get("seed", c.seed);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("adam_eps", c.adam_eps);
    get("weight_decay", c.weight_decay);
    get("initial_loss_scale", c.initial_loss_scale);
    get("scale_growth_interval", c.scale_growth_interval);
    get("loss_on_language_tokens", c.loss_on_language_tokens);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("training config: ") + e.what());
  }
  c.validate();
  return c;
}

double lr_at(int step, const TrainingConfig& c) {
  if (step < 0 || step > c.max_steps)
    throw ConfigError("lr_at: step " + std::to_string(step) + " outside [0, " + std::to_string(c.max_steps) + "]");
  if (step <= c.warmup_steps)
    return c.warmup_steps == 0 ? c.peak_lr : c.peak_lr * step / c.warmup_steps;
  return c.peak_lr * static_cast<double>(c.max_steps - step) / (c.max_steps - c.warmup_steps);
}

ParameterPartition ParameterPartition::of(const nn::EncoderDecoderModel& model) {
  ParameterPartition p;
  for (const auto& param : model.parameters()) {
    switch (param.group) {
      case nn::ParameterGroup::kEncoder: p.encoder.push_back(param.name); break;
      case nn::ParameterGroup::kDecoder: p.decoder.push_back(param.name); break;
      case nn::ParameterGroup::kEmbedding: p.embedding.push_back(param.name); break;
    }
  }
  return p;
}

void ParameterPartition::check(const nn::EncoderDecoderModel& model) const {
  std::set<std::string> seen;
  for (const auto* group : {&encoder, &decoder, &embedding})
    for (const auto& n : *group)
      if (!seen.insert(n).second) throw ConfigError("parameter '" + n + "' is in more than one group");
  std::set<std::string> all;
  for (const auto& p : model.parameters()) all.insert(p.name);
  if (seen != all) throw ConfigError("parameter partition does not match the model");
}

void freeze_encoder(nn::EncoderDecoderModel& model, const ParameterPartition& partition) {
  partition.check(model);
  for (const auto& n : partition.encoder) {
    auto& t = model.parameter(n);
    t.set_requires_grad(false);
    t.zero_grad();
  }
}

void unfreeze_encoder(nn::EncoderDecoderModel& model, const ParameterPartition& partition) {
  partition.check(model);
  for (const auto& n : partition.encoder) model.parameter(n).set_requires_grad(true);
}

std::size_t trainable_parameter_count(const nn::EncoderDecoderModel& model) {
  std::size_t n = 0;
  for (const auto& p : model.parameters())
    if (p.tensor.requires_grad()) n += p.tensor.numel();
  return n;
}

void AdamW::step(std::vector<nn::Parameter>& params, double lr, double grad_scale) {
  if (state_.empty()) state_.resize(params.size());
  if (state_.size() != params.size()) throw RuntimeFailure("optimizer used with a different parameter list");
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& t = params[p].tensor;
    if (!t.requires_grad()) continue;
    auto& s = state_[p];
    const std::size_t n = t.numel();
    if (s.m.empty()) {
      s.m.assign(n, 0.0);
      s.v.assign(n, 0.0);
    }
    auto w = t.values();
    const bool has_grad = t.has_grad();
    const auto g = std::as_const(t).grad();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = has_grad ? g[i] * grad_scale : 0.0;
      s.m[i] = b1 * s.m[i] + (1 - b1) * gi;
      s.v[i] = b2 * s.v[i] + (1 - b2) * gi * gi;
      const double update = (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + config_.adam_eps);
      w[i] = static_cast<float>(w[i] - lr * (update + config_.weight_decay * w[i]));
    }
  }
}

bool LossScaler::update(bool finite) {
  if (!finite) {
    scale_ = std::max(1.0, scale_ * 0.5);
    good_ = 0;
    ++skipped_;
    return false;
  }
  if (++good_ >= interval_) {
    scale_ *= 2.0;
    good_ = 0;
  }
  return true;
}

bool gradients_finite(const std::vector<nn::Parameter>& params) {
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (float g : p.tensor.grad())
      if (!std::isfinite(g)) return false;
  }
  return true;
}

void zero_gradients(std::vector<nn::Parameter>& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

nn::ParameterSnapshot average_checkpoints(std::span<const nn::ParameterSnapshot> snapshots, std::size_t k) {
  if (k == 0) throw ConfigError("cannot average zero checkpoints");
  if (k > snapshots.size())
    throw ConfigError("asked to average " + std::to_string(k) + " checkpoints but only " +
                      std::to_string(snapshots.size()) + " exist");
  const auto last = snapshots.subspan(snapshots.size() - k);
  for (const auto& s : last)
    if (!s.same_shapes(last[0])) throw ConfigError("checkpoint parameter shapes differ");
  nn::ParameterSnapshot out = last[0];
  for (std::size_t a = 0; a < out.arrays.size(); ++a) {
    auto& dst = out.arrays[a].data;
    const std::size_t n = dst.size();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (const auto& s : last) acc += s.arrays[a].data[i];
      dst[i] = static_cast<float>(acc / static_cast<double>(k));
    }
  }
  return out;
}

}  // namespace csw::adapt

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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cswhisper/nn/model.hpp"

namespace csw::adapt {

/// Update count used for the data-size ablations instead of max_steps.
inline constexpr int kAblationMaxSteps = 8000;

/// Fine-tuning recipe. Defaults: micro-batch 6 with 12 accumulation steps
/// (72 utterances per update), AdamW at peak 1e-5 after a 200-step linear
/// warmup, 30k updates, mixed precision.
struct TrainingConfig {
  int micro_batch = 6;
  int grad_accum = 12;
  double peak_lr = 1e-5;
  int warmup_steps = 200;
  int max_steps = 30000;
  bool mixed_precision = true;
  bool freeze_encoder = false;
  std::uint64_t seed = 0;

  // AdamW; the usual library defaults.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;

  // Dynamic loss scaling for mixed precision.
  double initial_loss_scale = 65536.0;
  int scale_growth_interval = 2000;

  /// Include the language token(s) of the prompt in the loss. Off by default:
  /// prompts condition the decoder and are not targets.
  bool loss_on_language_tokens = false;

  int effective_batch() const { return micro_batch * grad_accum; }
  /// Same recipe with the ablation step budget.
  TrainingConfig ablation() const;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static TrainingConfig from_json(const nlohmann::json& j);
};

/// Linear ramp from 0 at step 0 to peak at warmup_steps, then linear decay to
/// 0 at max_steps. Throws ConfigError outside [0, max_steps].
double lr_at(int step, const TrainingConfig& config);

/// Names of the model's parameters in each freezing group.
struct ParameterPartition {
  std::vector<std::string> encoder;
  std::vector<std::string> decoder;
  std::vector<std::string> embedding;

  static ParameterPartition of(const nn::EncoderDecoderModel& model);
  /// Throws ConfigError unless the groups are disjoint and cover the model.
  void check(const nn::EncoderDecoderModel& model) const;
};

/// Stops gradients into the encoder group; decoder and embedding stay trainable.
void freeze_encoder(nn::EncoderDecoderModel& model, const ParameterPartition& partition);
void unfreeze_encoder(nn::EncoderDecoderModel& model, const ParameterPartition& partition);
std::size_t trainable_parameter_count(const nn::EncoderDecoderModel& model);

/// Decoupled weight decay Adam over the parameters that require grad.
class AdamW {
 public:
  explicit AdamW(const TrainingConfig& config) : config_(config) {}

  /// One update with learning rate `lr`; gradients are multiplied by
  /// `grad_scale` first (1 / loss scale).
  void step(std::vector<nn::Parameter>& params, double lr, double grad_scale = 1.0);
  long steps_taken() const { return t_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  TrainingConfig config_;
  std::vector<Moments> state_;
  long t_ = 0;
};

/// Halves on overflow, doubles after `growth_interval` clean steps.
class LossScaler {
 public:
  LossScaler(double initial, int growth_interval) : scale_(initial), interval_(growth_interval) {}
  double scale() const { return scale_; }
  /// Returns false when the step must be skipped.
  bool update(bool gradients_finite);
  long skipped() const { return skipped_; }

 private:
  double scale_;
  int interval_;
  int good_ = 0;
  long skipped_ = 0;
};

bool gradients_finite(const std::vector<nn::Parameter>& params);
void zero_gradients(std::vector<nn::Parameter>& params);

/// Elementwise mean of the last `k` snapshots (double accumulation). Throws
/// ConfigError for k == 0, k > count, or mismatched shapes.
nn::ParameterSnapshot average_checkpoints(std::span<const nn::ParameterSnapshot> snapshots, std::size_t k = 5);

}  // namespace csw::adapt

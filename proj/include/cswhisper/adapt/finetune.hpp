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
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cswhisper/adapt/recipe.hpp"
#include "cswhisper/audio/features.hpp"
#include "cswhisper/corpus/manifest.hpp"
#include "cswhisper/nn/model.hpp"
#include "cswhisper/prompt/prompt.hpp"

namespace csw::adapt {

/// One utterance ready for teacher forcing.
struct TrainingExample {
  std::string utt_id;
  audio::FeatureMatrix features;  ///< already padded to the model's input length
  std::vector<int> text_tokens;   ///< transcript only, no specials
};

/// Transcript form the model learns: the scoring normalization, so training
/// targets and scored references agree.
std::string training_text(const std::string& raw);

/// Reads audio and extracts features for every record (OpenMP over records).
/// Throws RuntimeFailure naming the first unreadable file.
std::vector<TrainingExample> prepare_examples(const corpus::CorpusManifest& manifest,
                                              const nn::EncoderDecoderModel& model);

/// Decoder input and targets for prompt + text + eot. Targets are -1 where no
/// loss is taken (the prompt, unless `loss_on_language_tokens`). Text tokens
/// are truncated to fit the model's text context.
struct TeacherForcing {
  std::vector<int> inputs;
  std::vector<int> targets;
  std::size_t target_count() const;
};
TeacherForcing teacher_forcing(std::span<const int> prompt, std::span<const int> text_tokens,
                               const text::Vocabulary& vocab, int text_context,
                               bool loss_on_language_tokens);

/// Summed token cross entropy of one example, times `scale`.
nn::Tensor example_loss(const nn::EncoderDecoderModel& model, const TrainingExample& example,
                        const TeacherForcing& tf, nn::Precision precision, float scale);

/// Mean per-token loss over a dataset, full precision, no gradients.
double dataset_loss(const nn::EncoderDecoderModel& model, std::span<const TrainingExample> examples,
                    std::span<const int> prompt, bool loss_on_language_tokens = false);

struct CheckpointInfo {
  int epoch = 0;  ///< last epoch completed at this step (0 when max_steps ends inside epoch 1)
  int step = 0;
  std::string path;  ///< relative to the run directory
};

/// Checkpoints of one run plus the metadata that identifies it.
struct CheckpointSet {
  std::filesystem::path run_dir;
  std::vector<CheckpointInfo> checkpoints;
  nlohmann::ordered_json metadata;
  /// Used instead of files when run_dir is empty; parallel to `checkpoints`.
  std::vector<nn::ParameterSnapshot> in_memory;

  nn::ParameterSnapshot load(const CheckpointInfo& info) const;
  /// The last `k` snapshots, oldest first.
  std::vector<nn::ParameterSnapshot> load_last(std::size_t k) const;
};

struct StepRecord {
  int step = 0;
  double lr = 0.0;
  double loss = 0.0;  ///< per-token, unscaled
  double loss_scale = 1.0;
  bool skipped = false;
};

struct FinetuneResult {
  CheckpointSet checkpoints;
  std::vector<StepRecord> steps;
  double initial_loss = 0.0;  ///< dataset_loss before the first update
  double final_loss = 0.0;    ///< dataset_loss after the last update
  long skipped_steps = 0;
  bool reused = false;  ///< a completed run with the same fingerprint was found
};

struct FinetuneOptions {
  /// Empty: keep checkpoints in memory only (CheckpointSet::run_dir empty).
  std::filesystem::path run_dir;
  /// Identifies the training data; normally the manifest fingerprint.
  std::string data_fingerprint;
  /// Invoked after each update.
  std::function<void(const StepRecord&)> on_step;
  /// Keep only the newest checkpoints (0 keeps all). Does not change training.
  std::size_t keep_last = 0;
};

/// Teacher-forced fine-tuning under a fixed prompt. Gradients from
/// grad_accum micro-batches are summed, each token weighted by one over the
/// number of target tokens in the whole update, so the update does not
/// depend on how the effective batch is split. Update n (1-based) uses
/// lr_at(n). A checkpoint is written at the first update boundary after each
/// epoch and after the last update.
///
/// With a run directory: an existing completed run with the same
/// fingerprint is loaded instead of retrained; a run for different data is
/// an error; an unfinished run is discarded and restarted.
FinetuneResult finetune(nn::EncoderDecoderModel& model, std::span<const TrainingExample> examples,
                        const prompt::PromptStrategy& strategy, const TrainingConfig& config,
                        const FinetuneOptions& options = {});

/// Convenience overload that prepares the examples and fingerprints the manifest.
FinetuneResult finetune(nn::EncoderDecoderModel& model, const corpus::CorpusManifest& manifest,
                        const prompt::PromptStrategy& strategy, const TrainingConfig& config,
                        std::filesystem::path run_dir = {});

}  // namespace csw::adapt

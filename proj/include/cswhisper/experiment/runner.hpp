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

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "cswhisper/adapt/finetune.hpp"
#include "cswhisper/experiment/report.hpp"
#include "cswhisper/experiment/spec.hpp"
#include "cswhisper/nn/model.hpp"

namespace csw::experiment {

struct RunOptions {
  std::function<void(std::string_view)> log;
  /// Called with each training update (strategy slug, record).
  std::function<void(const std::string&, const adapt::StepRecord&)> on_step;
  /// Write rows.jsonl / report.* / curves.tsv into the output directory.
  bool publish = true;
};

struct RunResult {
  std::vector<ResultRow> rows;
  std::vector<CurvePoint> curves;  ///< ablation only
  /// Per strategy: training loss before and after, for cells that trained.
  std::vector<std::pair<std::string, adapt::FinetuneResult>> training;
};

/// Loads the spec's model; ConfigError when the directory is missing.
nn::EncoderDecoderModel load_model(const ExperimentSpec& spec);
/// Hash of every parameter and installed fused token.
std::string model_checksum(const nn::EncoderDecoderModel& model);

/// Every strategy x eval split with the pretrained model.
RunResult run_zero_shot(const ExperimentSpec& spec, const RunOptions& options = {});
/// Per fine-tune strategy: train, average the last checkpoints, decode every
/// eval split with the same prompt. A failed strategy does not stop the
/// others; after the report is written, RuntimeFailure names it.
RunResult run_finetune_grid(const ExperimentSpec& spec, const RunOptions& options = {});
/// Every ablation size x freeze variant with the ablation strategy.
RunResult run_ablation(const ExperimentSpec& spec, const RunOptions& options = {});

}  // namespace csw::experiment

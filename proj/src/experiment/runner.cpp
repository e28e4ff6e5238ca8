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

#include "cswhisper/experiment/runner.hpp"

#include <chrono>
#include <cstdio>
#include <map>
#include <optional>

#include "cswhisper/adapt/finetune.hpp"
#include "cswhisper/common/error.hpp"
#include "cswhisper/common/files.hpp"
#include "cswhisper/common/hash.hpp"

namespace csw::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

nn::EncoderDecoderModel load_model(const ExperimentSpec& spec) {
  if (spec.model.empty()) throw ConfigError("no model given (set \"model\" in the spec or CSW_MODEL_DIR)");
  if (!fs::is_directory(spec.model)) throw ConfigError("model directory not found: " + spec.model.string());
  return nn::EncoderDecoderModel::load(spec.model);
}

std::string model_checksum(const nn::EncoderDecoderModel& model) {
  Fnv1a64 h;
  for (const auto& p : model.parameters()) {
    h.update(p.name);
    h.update(p.tensor.values());
  }
  for (const auto& f : model.fused_tokens()) {
    h.update(f.label);
    h.update(std::to_string(f.slot_token));
  }
  return h.hex();
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void say(const RunOptions& o, const std::string& msg) {
  if (o.log) o.log(msg);
}

std::string size_tag(const std::optional<double>& hours, bool full) {
  if (full) return "full";
  if (!hours) return "zs";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%gh", *hours);
  return buf;
}

/// Shared state of one run over a spec.
struct Study {
  const ExperimentSpec& spec;
  const RunOptions& options;
  std::string fingerprint;
  nn::EncoderDecoderModel base;
  std::string base_sum;
  std::vector<std::pair<SplitRef, corpus::CorpusManifest>> evals;

  Study(const ExperimentSpec& s, const RunOptions& o)
      : spec(s), options(o), fingerprint(s.fingerprint()), base(load_model(s)), base_sum(model_checksum(base)) {
    spec.validate(&base.vocabulary());
    for (const auto& e : spec.eval) evals.emplace_back(e, e.load());
    fs::create_directories(spec.output_dir);
    // The canonical spec next to its rows, so fingerprints can be re-derived.
    write_file_atomic(spec.output_dir / "spec.json", spec.to_json().dump(2) + "\n");
  }

  fs::path cell_dir(const std::string& mode, const prompt::PromptStrategy& s, const std::string& size,
                    bool freeze) const {
    const std::string id = fingerprint + '|' + base_sum + '|' + mode + '|' + s.slug() + '|' + size + '|' +
                           (freeze ? "1" : "0");
    const auto key = to_hex(fnv1a64(id)).substr(0, 8);
    return spec.output_dir / "cells" /
           (mode + "-" + s.slug() + "-" + size + "-" + (freeze ? "frozen" : "trained") + "-" + key);
  }

  static fs::path row_file(const fs::path& cell, const std::string& split) {
    return cell / ("row-" + split + ".json");
  }

  bool cell_complete(const fs::path& cell) const {
    for (const auto& [ref, m] : evals)
      if (!fs::exists(row_file(cell, ref.name))) return false;
    return true;
  }

  ResultRow cached_row(const fs::path& cell, const std::string& split) const {
    return ResultRow::from_json(json::parse(read_file(row_file(cell, split))));
  }

  /// Decodes and scores one split, or returns the stored row.
  ResultRow decode_split(const nn::EncoderDecoderModel& model, const prompt::PromptStrategy& strategy,
                         const fs::path& cell, const SplitRef& ref, const corpus::CorpusManifest& manifest,
                         ResultRow row) const {
    const auto rf = row_file(cell, ref.name);
    if (fs::exists(rf)) return cached_row(cell, ref.name);
    const auto t0 = Clock::now();
    const auto hyp = cell / ("hyp-" + ref.name + ".jsonl");
    fs::create_directories(cell);
    decode::DecodeConfig dc = spec.decode;
    dc.strategy = strategy;
    decode::BatchOptions bo;
    bo.output = hyp;
    bo.installed = model.fused_tokens();
    const auto hyps = decode::batch_transcribe(model, manifest, dc, bo);
    const auto score = score_hypotheses(manifest, hyps);
    row.split = ref.name;
    row.mer = score.report.mer;
    row.counts = score.report.counts;
    row.utterances = manifest.size();
    row.failed = score.failed;
    row.runaway = score.runaway;
    row.wall_seconds += seconds_since(t0);
    row.config_fingerprint = fingerprint;
    row.hypotheses = fs::relative(hyp, spec.output_dir).generic_string();
    if (score.failed) say(options, ref.name + ": " + std::to_string(score.failed) + " utterance(s) failed to decode");
    write_file_atomic(rf, row.to_json().dump(2) + "\n");
    say(options, row.mode + " " + row.slug + " " + ref.name + ": MER " +
                     (row.mer ? std::to_string(*row.mer) : std::string("n/a")));
    return row;
  }

  ResultRow row_template(const std::string& mode, const prompt::PromptStrategy& s) const {
    ResultRow r;
    r.experiment = spec.name;
    r.mode = mode;
    r.type = strategy_type(s);
    r.label = s.symbol();
    r.slug = s.slug();
    r.checkpoint = "zero-shot";
    return r;
  }

  /// Model with the strategy's fused token installed when it needs one.
  nn::EncoderDecoderModel model_for(const prompt::PromptStrategy& s) const {
    auto m = base.clone();
    if (s.kind == prompt::StrategyKind::kFused && !m.fused_token(s.fused->label))
      prompt::install_fused_embedding(m, *s.fused);
    return m;
  }

  void publish(const std::string& mode, const std::vector<ResultRow>& rows) const {
    if (options.publish) publish_rows(spec.output_dir, mode, rows, spec.ablation.references);
  }
};

struct TrainCell {
  std::string mode;
  prompt::PromptStrategy strategy;
  std::optional<double> nominal_hours;
  bool full = true;
  bool freeze = false;
  adapt::TrainingConfig config;
  const corpus::CorpusManifest* data = nullptr;
};

/// Train (or reuse), average, decode every split. Appends rows.
void run_train_cell(Study& st, const TrainCell& c, std::span<const adapt::TrainingExample> all_examples,
                    RunResult& out) {
  const auto cell = st.cell_dir(c.mode, c.strategy, size_tag(c.nominal_hours, c.full), c.freeze);
  ResultRow tmpl = st.row_template(c.mode, c.strategy);
  tmpl.train_hours = c.nominal_hours;
  tmpl.actual_hours = c.data->total_hours();
  tmpl.freeze = c.freeze;
  if (st.cell_complete(cell)) {
    say(st.options, c.mode + " " + c.strategy.slug() + ": cached");
    for (const auto& [ref, m] : st.evals) out.rows.push_back(st.cached_row(cell, ref.name));
    return;
  }

  std::vector<adapt::TrainingExample> examples;
  {
    std::map<std::string, const adapt::TrainingExample*> by_id;
    for (const auto& e : all_examples) by_id[e.utt_id] = &e;
    for (const auto& r : c.data->records()) examples.push_back(*by_id.at(r.utt_id));
  }
  auto model = st.model_for(c.strategy);
  auto config = c.config;
  config.freeze_encoder = c.freeze;
  adapt::FinetuneOptions fo;
  fo.run_dir = cell / "run";
  fo.data_fingerprint = c.data->fingerprint();
  fo.keep_last = static_cast<std::size_t>(st.spec.average_last);
  if (st.options.on_step) {
    const auto slug = c.strategy.slug();
    fo.on_step = [&, slug](const adapt::StepRecord& s) { st.options.on_step(slug, s); };
  }
  say(st.options, c.mode + " " + c.strategy.slug() + ": training on " + std::to_string(examples.size()) +
                      " utterances for " + std::to_string(config.max_steps) + " steps");
  const auto t0 = Clock::now();
  auto result = adapt::finetune(model, examples, c.strategy, config, fo);
  const auto& ckpts = result.checkpoints.checkpoints;
  const std::size_t k = std::min<std::size_t>(st.spec.average_last, ckpts.size());
  const auto snaps = result.checkpoints.load_last(k);
  model.restore(adapt::average_checkpoints(snaps, k));
  tmpl.wall_seconds = seconds_since(t0);
  tmpl.checkpoint = fs::relative(fo.run_dir, st.spec.output_dir).generic_string();
  for (std::size_t i = ckpts.size() - k; i < ckpts.size(); ++i) tmpl.averaged_steps.push_back(ckpts[i].step);
  say(st.options, c.mode + " " + c.strategy.slug() + ": loss " + std::to_string(result.initial_loss) + " -> " +
                      std::to_string(result.final_loss) + (result.reused ? " (reused run)" : ""));
  out.training.emplace_back(c.strategy.slug(), std::move(result));
  for (const auto& [ref, m] : st.evals) out.rows.push_back(st.decode_split(model, c.strategy, cell, ref, m, tmpl));
}

corpus::CorpusManifest load_train(const ExperimentSpec& spec) {
  if (!spec.train) throw ConfigError("spec '" + spec.name + "' has no train split");
  return spec.train->load();
}

}  // namespace

RunResult run_zero_shot(const ExperimentSpec& spec, const RunOptions& options) {
  spec.validate();
  Study st(spec, options);
  RunResult out;
  if (spec.strategies.empty()) say(options, "warning: no strategies configured; the report is empty");
  for (const auto& s : spec.strategies) {
    const auto cell = st.cell_dir("zero-shot", s, "zs", false);
    if (st.cell_complete(cell)) {
      for (const auto& [ref, m] : st.evals) out.rows.push_back(st.cached_row(cell, ref.name));
      continue;
    }
    const auto model = st.model_for(s);
    for (const auto& [ref, m] : st.evals)
      out.rows.push_back(st.decode_split(model, s, cell, ref, m, st.row_template("zero-shot", s)));
  }
  st.publish("zero-shot", out.rows);
  return out;
}

RunResult run_finetune_grid(const ExperimentSpec& spec, const RunOptions& options) {
  spec.validate();
  const auto train = load_train(spec);
  Study st(spec, options);
  RunResult out;
  if (spec.finetune_strategies.empty()) say(options, "warning: no fine-tune strategies configured");
  std::optional<std::vector<adapt::TrainingExample>> examples;
  std::vector<std::string> failures;
  for (const auto& s : spec.finetune_strategies) {
    TrainCell c{"finetune", s, train.total_hours(), true, false, spec.training, &train};
    c.freeze = spec.training.freeze_encoder;
    try {
      if (!examples && !st.cell_complete(st.cell_dir("finetune", s, "full", c.freeze)))
        examples = adapt::prepare_examples(train, st.base);
      run_train_cell(st, c, examples ? std::span<const adapt::TrainingExample>(*examples)
                                     : std::span<const adapt::TrainingExample>(),
                     out);
    } catch (const RuntimeFailure& e) {
      say(options, "fine-tuning " + s.slug() + " failed: " + e.what());
      failures.push_back(s.slug() + ": " + e.what());
    }
  }
  st.publish("finetune", out.rows);
  if (!failures.empty()) {
    std::string msg = "fine-tuning failed for " + std::to_string(failures.size()) + " strategy(ies):";
    for (const auto& f : failures) msg += "\n  " + f;
    throw RuntimeFailure(msg);
  }
  return out;
}

RunResult run_ablation(const ExperimentSpec& spec, const RunOptions& options) {
  spec.validate();
  const auto train = load_train(spec);
  for (double h : spec.ablation.hours)
    if (h > train.total_hours())
      throw ConfigError("ablation size " + std::to_string(h) + " h exceeds the train split (" +
                        std::to_string(train.total_hours()) + " h)");
  Study st(spec, options);
  RunResult out;

  std::vector<corpus::CorpusManifest> subsets;
  for (std::size_t i = 0; i < spec.ablation.hours.size(); ++i) {
    const auto seed = spec.ablation.subset_seed + (spec.ablation.independent_subsets ? i : 0);
    subsets.push_back(corpus::subset_by_duration(train, spec.ablation.hours[i], seed));
  }
  auto subset_config = spec.training.ablation();
  subset_config.max_steps = spec.ablation.max_steps;

  std::vector<TrainCell> cells;
  for (bool freeze : spec.ablation.freeze) {
    for (std::size_t i = 0; i < subsets.size(); ++i)
      cells.push_back({"ablation", spec.ablation.strategy, spec.ablation.hours[i], false, freeze, subset_config,
                       &subsets[i]});
    if (spec.ablation.include_full)
      cells.push_back({"ablation", spec.ablation.strategy, train.total_hours(), true, freeze, spec.training, &train});
  }

  std::optional<std::vector<adapt::TrainingExample>> examples;
  std::vector<std::string> failures;
  for (const auto& c : cells) {
    try {
      const auto cell = st.cell_dir(c.mode, c.strategy, size_tag(c.nominal_hours, c.full), c.freeze);
      if (!examples && !st.cell_complete(cell)) examples = adapt::prepare_examples(train, st.base);
      run_train_cell(st, c, examples ? std::span<const adapt::TrainingExample>(*examples)
                                     : std::span<const adapt::TrainingExample>(),
                     out);
    } catch (const RuntimeFailure& e) {
      const auto what = size_tag(c.nominal_hours, c.full) + (c.freeze ? " frozen" : " trained");
      say(options, "ablation " + what + " failed: " + e.what());
      failures.push_back(what + ": " + e.what());
    }
  }
  out.curves = curves_from_rows(out.rows, spec.ablation.references);
  st.publish("ablation", out.rows);
  if (!failures.empty()) {
    std::string msg = "ablation failed for " + std::to_string(failures.size()) + " cell(s):";
    for (const auto& f : failures) msg += "\n  " + f;
    throw RuntimeFailure(msg);
  }
  return out;
}

}  // namespace csw::experiment

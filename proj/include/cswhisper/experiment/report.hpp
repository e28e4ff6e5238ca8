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

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cswhisper/corpus/manifest.hpp"
#include "cswhisper/decode/decode.hpp"
#include "cswhisper/scoring/mer.hpp"

namespace csw::experiment {

/// One (prompt, training condition, split) cell of a results table.
struct ResultRow {
  std::string experiment;
  std::string mode;   ///< "zero-shot", "finetune" or "ablation"
  std::string type;   ///< "Official" (official/auto/reference) or "Custom"
  std::string label;  ///< prompt symbol, e.g. <|en|><|zh|>
  std::string slug;
  std::optional<double> train_hours;  ///< empty for zero-shot; the nominal size for ablations
  std::optional<double> actual_hours;  ///< duration actually trained on
  bool freeze = false;
  std::string split;
  std::optional<double> mer;
  scoring::ErrorCounts counts;
  std::size_t utterances = 0;
  std::size_t failed = 0;   ///< errored or missing hypotheses, scored as empty
  std::size_t runaway = 0;
  double wall_seconds = 0.0;
  std::string config_fingerprint;  ///< ExperimentSpec::fingerprint()
  std::string checkpoint;          ///< "zero-shot" or the run directory, relative to the output dir
  std::vector<int> averaged_steps;
  std::string hypotheses;          ///< hypothesis file, relative to the output dir

  /// Everything except wall_seconds, which is the only nondeterministic field.
  bool same_result(const ResultRow& other) const;
  nlohmann::ordered_json to_json() const;
  static ResultRow from_json(const nlohmann::json& j);
};

std::string strategy_type(const prompt::PromptStrategy& s);

/// Corpus-level score of a hypothesis file against its manifest. Missing and
/// errored hypotheses count as empty output.
struct SplitScore {
  scoring::MerReport report;
  std::size_t failed = 0;
  std::size_t runaway = 0;
};
SplitScore score_hypotheses(const corpus::CorpusManifest& manifest, std::span<const decode::Hypothesis> hyps);

/// One value of a data-size curve.
struct CurvePoint {
  std::string series;  ///< "full-model", "freeze-encoder", or a reference name
  std::optional<double> hours;  ///< empty for horizontal references
  std::string split;   ///< empty for references
  std::optional<double> mer;
  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

std::vector<CurvePoint> curves_from_rows(std::span<const ResultRow> rows,
                                         const std::map<std::string, double>& references = {});
std::string render_curves(std::span<const CurvePoint> points);
std::vector<CurvePoint> parse_curves(std::string_view tsv);

/// Tab-separated, one line per row, stable column set (no wall-clock).
std::string render_tsv(std::span<const ResultRow> rows);
/// Fixed-width tables per mode: (Type, L-Prompt[, Hours, Encoder]) by split,
/// best (lowest) MER per column marked with '*', absent cells as '-'.
/// Throws ConfigError on empty input.
std::string render_table(std::span<const ResultRow> rows);

std::vector<ResultRow> load_rows(const std::filesystem::path& rows_jsonl);

/// Replaces the rows of `mode` in <dir>/rows.jsonl and rewrites rows.jsonl,
/// report.tsv and report.txt atomically. Returns the merged rows.
std::vector<ResultRow> publish_rows(const std::filesystem::path& dir, const std::string& mode,
                                    std::span<const ResultRow> rows,
                                    const std::map<std::string, double>& references = {});
/// Re-renders report.tsv, report.txt (and curves.tsv if ablation rows exist).
void write_report(const std::filesystem::path& dir, std::span<const ResultRow> rows,
                  const std::map<std::string, double>& references = {});

}  // namespace csw::experiment

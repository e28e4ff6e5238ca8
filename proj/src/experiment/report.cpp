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

#include "cswhisper/experiment/report.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "cswhisper/common/error.hpp"
#include "cswhisper/common/files.hpp"

namespace csw::experiment {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Shortest text that parses back to the same double.
std::string exact(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string opt_exact(const std::optional<double>& v) { return v ? exact(*v) : "-"; }

std::optional<double> parse_opt(std::string_view s) {
  if (s == "-" || s.empty()) return std::nullopt;
  double v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw ConfigError("not a number: '" + std::string(s) + "'");
  return v;
}

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string hours_text(const std::optional<double>& h) {
  if (!h) return "zero-shot";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", *h);
  return buf;
}

ordered_json opt_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }
std::optional<double> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    out.emplace_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

int mode_rank(const std::string& m) {
  if (m == "zero-shot") return 0;
  if (m == "finetune") return 1;
  if (m == "ablation") return 2;
  return 3;
}

}  // namespace

bool ResultRow::same_result(const ResultRow& o) const {
  auto a = to_json();
  auto b = o.to_json();
  a.erase("wall_seconds");
  b.erase("wall_seconds");
  return a == b;
}

ordered_json ResultRow::to_json() const {
  return {{"experiment", experiment},
          {"mode", mode},
          {"type", type},
          {"label", label},
          {"slug", slug},
          {"train_hours", opt_json(train_hours)},
          {"actual_hours", opt_json(actual_hours)},
          {"freeze", freeze},
          {"split", split},
          {"mer", opt_json(mer)},
          {"counts",
           {{"n_ref", counts.n_ref},
            {"substitutions", counts.substitutions},
            {"deletions", counts.deletions},
            {"insertions", counts.insertions}}},
          {"utterances", utterances},
          {"failed", failed},
          {"runaway", runaway},
          {"wall_seconds", wall_seconds},
          {"config_fingerprint", config_fingerprint},
          {"checkpoint", checkpoint},
          {"averaged_steps", averaged_steps},
          {"hypotheses", hypotheses}};
}

ResultRow ResultRow::from_json(const json& j) {
  ResultRow r;
  try {
    r.experiment = j.at("experiment").get<std::string>();
    r.mode = j.at("mode").get<std::string>();
    r.type = j.at("type").get<std::string>();
    r.label = j.at("label").get<std::string>();
    r.slug = j.at("slug").get<std::string>();
    r.train_hours = opt_from(j, "train_hours");
    r.actual_hours = opt_from(j, "actual_hours");
    r.freeze = j.at("freeze").get<bool>();
    r.split = j.at("split").get<std::string>();
    r.mer = opt_from(j, "mer");
    const auto& c = j.at("counts");
    r.counts.n_ref = c.at("n_ref");
    r.counts.substitutions = c.at("substitutions");
    r.counts.deletions = c.at("deletions");
    r.counts.insertions = c.at("insertions");
    r.utterances = j.at("utterances");
    r.failed = j.value("failed", std::size_t{0});
    r.runaway = j.value("runaway", std::size_t{0});
    r.wall_seconds = j.value("wall_seconds", 0.0);
    r.config_fingerprint = j.at("config_fingerprint").get<std::string>();
    r.checkpoint = j.at("checkpoint").get<std::string>();
    r.averaged_steps = j.value("averaged_steps", std::vector<int>{});
    r.hypotheses = j.at("hypotheses").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed result row: ") + e.what());
  }
  return r;
}

std::string strategy_type(const prompt::PromptStrategy& s) {
  using prompt::StrategyKind;
  return (s.kind == StrategyKind::kCombined || s.kind == StrategyKind::kFused) ? "Custom" : "Official";
}

SplitScore score_hypotheses(const corpus::CorpusManifest& manifest, std::span<const decode::Hypothesis> hyps) {
  std::map<std::string, const decode::Hypothesis*> by_id;
  for (const auto& h : hyps) by_id[h.utt_id] = &h;
  SplitScore out;
  std::vector<scoring::TextPair> pairs;
  pairs.reserve(manifest.size());
  for (const auto& r : manifest.records()) {
    auto it = by_id.find(r.utt_id);
    std::string text;
    if (it == by_id.end() || it->second->error) {
      ++out.failed;
    } else {
      text = it->second->text;
      if (it->second->runaway) ++out.runaway;
    }
    pairs.push_back({r.utt_id, r.text, std::move(text)});
  }
  auto scored = scoring::score_pairs(pairs);
  std::vector<scoring::MerReport> reports;
  reports.reserve(scored.size());
  for (auto& s : scored) reports.push_back(std::move(s.report));
  try {
    out.report = scoring::aggregate(reports);
  } catch (const ConfigError&) {
    // no reference tokens at all: counts stay, the rate is undefined
    for (const auto& r : reports) {
      out.report.utterances += r.utterances;
      out.report.counts += r.counts;
    }
  }
  return out;
}

std::vector<CurvePoint> curves_from_rows(std::span<const ResultRow> rows,
                                         const std::map<std::string, double>& references) {
  std::vector<CurvePoint> out;
  for (const auto& r : rows) {
    if (r.mode != "ablation") continue;
    out.push_back({r.freeze ? "freeze-encoder" : "full-model", r.train_hours, r.split, r.mer});
  }
  std::stable_sort(out.begin(), out.end(), [](const CurvePoint& a, const CurvePoint& b) {
    if (a.series != b.series) return a.series > b.series;  // full-model first
    if (a.split != b.split) return a.split < b.split;
    return a.hours.value_or(0) < b.hours.value_or(0);
  });
  for (const auto& [name, mer] : references) out.push_back({name, std::nullopt, "", mer});
  return out;
}

std::string render_curves(std::span<const CurvePoint> points) {
  std::string out = "series\thours\tsplit\tmer\n";
  for (const auto& p : points)
    out += p.series + '\t' + opt_exact(p.hours) + '\t' + (p.split.empty() ? "-" : p.split) + '\t' +
           opt_exact(p.mer) + '\n';
  return out;
}

std::vector<CurvePoint> parse_curves(std::string_view tsv) {
  std::vector<CurvePoint> out;
  std::istringstream in{std::string(tsv)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (n == 1) {
      if (line != "series\thours\tsplit\tmer") throw ConfigError("curve file: unexpected header");
      continue;
    }
    if (line.empty()) continue;
    auto f = split_tabs(line);
    if (f.size() != 4) throw ConfigError("curve file line " + std::to_string(n) + ": expected 4 fields");
    try {
      out.push_back({f[0], parse_opt(f[1]), f[2] == "-" ? "" : f[2], parse_opt(f[3])});
    } catch (const ConfigError& e) {
      throw ConfigError("curve file line " + std::to_string(n) + ": " + e.what());
    }
  }
  if (n == 0) throw ConfigError("curve file is empty");
  return out;
}

std::string render_tsv(std::span<const ResultRow> rows) {
  std::string out =
      "experiment\tmode\ttype\tlabel\tslug\ttrain_hours\tactual_hours\tfreeze\tsplit\tmer\tn_ref\t"
      "substitutions\tdeletions\tinsertions\tutterances\tfailed\trunaway\tcheckpoint\taveraged_steps\t"
      "hypotheses\tconfig_fingerprint\n";
  for (const auto& r : rows) {
    std::string steps;
    for (std::size_t i = 0; i < r.averaged_steps.size(); ++i)
      steps += (i ? "," : "") + std::to_string(r.averaged_steps[i]);
    if (steps.empty()) steps = "-";
    out += r.experiment + '\t' + r.mode + '\t' + r.type + '\t' + r.label + '\t' + r.slug + '\t' +
           opt_exact(r.train_hours) + '\t' + opt_exact(r.actual_hours) + '\t' + (r.freeze ? "true" : "false") +
           '\t' + r.split + '\t' + opt_exact(r.mer) + '\t' + std::to_string(r.counts.n_ref) + '\t' +
           std::to_string(r.counts.substitutions) + '\t' + std::to_string(r.counts.deletions) + '\t' +
           std::to_string(r.counts.insertions) + '\t' + std::to_string(r.utterances) + '\t' +
           std::to_string(r.failed) + '\t' + std::to_string(r.runaway) + '\t' + r.checkpoint + '\t' + steps +
           '\t' + r.hypotheses + '\t' + r.config_fingerprint + '\n';
  }
  return out;
}

std::string render_table(std::span<const ResultRow> rows) {
  if (rows.empty()) throw ConfigError("nothing to report: no result rows");
  std::vector<std::string> modes;
  for (const auto& r : rows)
    if (std::find(modes.begin(), modes.end(), r.mode) == modes.end()) modes.push_back(r.mode);
  std::stable_sort(modes.begin(), modes.end(),
                   [](const std::string& a, const std::string& b) { return mode_rank(a) < mode_rank(b); });

  std::string out;
  for (const auto& mode : modes) {
    std::vector<const ResultRow*> section;
    for (const auto& r : rows)
      if (r.mode == mode) section.push_back(&r);
    const bool show_hours = mode == "ablation";
    const bool show_freeze =
        std::any_of(section.begin(), section.end(), [](const ResultRow* r) { return r->freeze; });

    std::vector<std::string> splits;
    std::vector<std::vector<std::string>> keys;  // row header cells
    std::map<std::pair<std::size_t, std::string>, const ResultRow*> cell;
    for (const auto* r : section) {
      if (std::find(splits.begin(), splits.end(), r->split) == splits.end()) splits.push_back(r->split);
      std::vector<std::string> key{r->type, r->label};
      if (show_hours) key.push_back(hours_text(r->train_hours));
      if (show_freeze) key.push_back(r->freeze ? "frozen" : "trained");
      auto it = std::find(keys.begin(), keys.end(), key);
      std::size_t idx = it - keys.begin();
      if (it == keys.end()) keys.push_back(key);
      cell[{idx, r->split}] = r;
    }
    // lowest MER per column
    std::map<std::string, double> best;
    for (const auto& [k, r] : cell)
      if (r->mer && (!best.count(k.second) || *r->mer < best[k.second])) best[k.second] = *r->mer;

    std::vector<std::string> head{"Type", "L-Prompt"};
    if (show_hours) head.push_back("Hours");
    if (show_freeze) head.push_back("Encoder");
    const std::size_t n_key = head.size();
    for (const auto& s : splits) head.push_back(s);
    std::vector<std::vector<std::string>> grid{head};
    for (std::size_t i = 0; i < keys.size(); ++i) {
      auto line = keys[i];
      for (const auto& s : splits) {
        auto it = cell.find({i, s});
        if (it == cell.end()) {
          line.push_back("-");
        } else if (!it->second->mer) {
          line.push_back("n/a");
        } else {
          auto v = fixed2(*it->second->mer);
          if (*it->second->mer == best[s]) v += '*';
          line.push_back(v);
        }
      }
      grid.push_back(line);
    }
    std::vector<std::size_t> width(head.size(), 0);
    for (const auto& line : grid)
      for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());

    out += "== " + mode + " (" + section.front()->experiment + ") MER % ==\n";
    for (const auto& line : grid) {
      std::string text;
      for (std::size_t c = 0; c < line.size(); ++c) {
        if (c) text += "  ";
        const auto pad = std::string(width[c] - line[c].size(), ' ');
        text += c < n_key ? line[c] + pad : pad + line[c];  // numbers right-aligned
      }
      while (!text.empty() && text.back() == ' ') text.pop_back();
      out += text + '\n';
    }
    out += '\n';
  }
  return out;
}

std::vector<ResultRow> load_rows(const fs::path& path) {
  std::vector<ResultRow> out;
  for (const auto& line : read_lines(path)) {
    if (line.text.empty()) continue;
    try {
      out.push_back(ResultRow::from_json(json::parse(line.text)));
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line.number) + ": " + e.what());
    }
  }
  return out;
}

void write_report(const fs::path& dir, std::span<const ResultRow> rows,
                  const std::map<std::string, double>& references) {
  fs::create_directories(dir);
  std::string jsonl;
  for (const auto& r : rows) jsonl += r.to_json().dump() + '\n';
  write_file_atomic(dir / "rows.jsonl", jsonl);
  write_file_atomic(dir / "report.tsv", render_tsv(rows));
  write_file_atomic(dir / "report.txt", rows.empty() ? std::string("(no results)\n") : render_table(rows));
  auto curves = curves_from_rows(rows, references);
  if (std::any_of(rows.begin(), rows.end(), [](const ResultRow& r) { return r.mode == "ablation"; }))
    write_file_atomic(dir / "curves.tsv", render_curves(curves));
}

std::vector<ResultRow> publish_rows(const fs::path& dir, const std::string& mode, std::span<const ResultRow> rows,
                                    const std::map<std::string, double>& references) {
  std::vector<ResultRow> merged;
  if (fs::exists(dir / "rows.jsonl"))
    for (auto& r : load_rows(dir / "rows.jsonl"))
      if (r.mode != mode) merged.push_back(std::move(r));
  merged.insert(merged.end(), rows.begin(), rows.end());
  std::stable_sort(merged.begin(), merged.end(), [](const ResultRow& a, const ResultRow& b) {
    return mode_rank(a.mode) < mode_rank(b.mode);
  });
  write_report(dir, merged, references);
  return merged;
}

}  // namespace csw::experiment

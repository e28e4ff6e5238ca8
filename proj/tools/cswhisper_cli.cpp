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

// cswhisper command line: manifests, prompts, fine-tuning grids, decoding,
// scoring and reports. Exit codes: 0 ok, 1 configuration error, 2 runtime
// failure (partial results are kept on disk).

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "cswhisper/common/error.hpp"
#include "cswhisper/common/files.hpp"
#include "cswhisper/corpus/manifest.hpp"
#include "cswhisper/corpus/synth.hpp"
#include "cswhisper/decode/decode.hpp"
#include "cswhisper/experiment/runner.hpp"
#include "cswhisper/scoring/mer.hpp"

namespace fs = std::filesystem;
using namespace csw;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeFailure = 2;

corpus::CorpusManifest load_split(const fs::path& manifest, const std::string& split) {
  auto m = corpus::load_manifest(manifest);
  if (split.empty()) return m;
  auto sub = m.filter_split(split);
  if (sub.empty()) throw ConfigError("split '" + split + "' has no records in " + manifest.string());
  return sub;
}

std::string mer_text(const std::optional<double>& mer) {
  if (!mer) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *mer);
  return buf;
}

experiment::ExperimentSpec load_spec(const fs::path& path, const std::string& out_dir) {
  auto spec = experiment::load_spec(path);
  experiment::apply_environment(spec);
  if (!out_dir.empty()) spec.output_dir = out_dir;
  return spec;
}

experiment::RunOptions run_options() {
  experiment::RunOptions o;
  o.log = [](std::string_view m) { spdlog::info("{}", m); };
  o.on_step = [](const std::string& slug, const adapt::StepRecord& s) {
    if (s.step % 50 == 0 || s.skipped)
      spdlog::debug("{} step {} lr {:.3g} loss {:.4f}{}", slug, s.step, s.lr, s.loss, s.skipped ? " (skipped)" : "");
  };
  return o;
}

void print_report(const fs::path& dir) {
  if (fs::exists(dir / "report.txt")) std::cout << read_file(dir / "report.txt");
  spdlog::info("report written to {}", (dir / "report.txt").string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cswhisper: code-switching adaptation toolkit for Whisper-style models"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  // prepare
  auto* prepare = app.add_subcommand("prepare", "validate a manifest and print per-split statistics");
  std::string manifest_path;
  bool verify = false;
  prepare->add_option("manifest", manifest_path, "JSON-lines manifest")->required();
  prepare->add_flag("--verify", verify, "cross-check durations against the audio headers");

  // subset
  auto* subset = app.add_subcommand("subset", "draw a seeded duration-targeted subset");
  std::string split, out_path;
  double hours = 0;
  std::uint64_t seed = 0;
  subset->add_option("manifest", manifest_path)->required();
  subset->add_option("--split", split, "restrict to one split first");
  subset->add_option("--hours", hours, "target duration")->required()->check(CLI::PositiveNumber);
  subset->add_option("--seed", seed);
  subset->add_option("-o,--out", out_path, "output manifest")->required();

  // spec-driven runs
  std::string spec_path, spec_out;
  auto add_spec = [&](CLI::App* c) {
    c->add_option("spec", spec_path, "experiment spec (JSON)")->required();
    c->add_option("--out", spec_out, "override the output directory");
  };
  auto* zero_shot = app.add_subcommand("zero-shot", "decode every eval split with every strategy");
  add_spec(zero_shot);
  auto* finetune = app.add_subcommand("finetune", "fine-tune per strategy, average, decode, score");
  add_spec(finetune);
  auto* ablate = app.add_subcommand("ablate", "data-size x freeze-encoder sweep");
  add_spec(ablate);

  // decode
  auto* decode_cmd = app.add_subcommand("decode", "greedy decoding of a manifest under one prompt");
  std::string model_dir, strategy_text = "auto";
  decode::DecodeConfig dc;
  std::optional<std::size_t> limit;
  decode_cmd->add_option("--model", model_dir)->required();
  decode_cmd->add_option("manifest", manifest_path)->required();
  decode_cmd->add_option("--split", split);
  decode_cmd->add_option("--strategy", strategy_text, "auto | official:zh | combined:en,zh | fused | reference:ru");
  decode_cmd->add_option("-o,--out", out_path, "hypothesis JSONL (resumable)")->required();
  decode_cmd->add_option("--max-tokens", dc.max_output_tokens);
  decode_cmd->add_flag("--no-timestamps", dc.no_timestamps);
  decode_cmd->add_flag("--fused-in-auto", dc.fused_in_auto);
  decode_cmd->add_option("--limit", limit, "stop after this many new utterances");

  // score
  auto* score = app.add_subcommand("score", "Mixed Error Rate of a hypothesis file");
  std::string hyp_path, json_out, align_out;
  score->add_option("manifest", manifest_path)->required();
  score->add_option("--split", split);
  score->add_option("--hyp", hyp_path)->required();
  score->add_option("--json", json_out, "write the corpus report as JSON");
  score->add_option("--alignments", align_out, "write per-utterance alignments");

  // report
  auto* report = app.add_subcommand("report", "re-render report files from rows.jsonl");
  std::string report_dir;
  report->add_option("dir", report_dir, "experiment output directory")->required();

  // init-model
  auto* init = app.add_subcommand("init-model", "write a randomly initialized model directory");
  std::string config_path, vocab = "byte";
  nn::ModelConfig mc;
  init->add_option("-o,--out", out_path)->required();
  init->add_option("--config", config_path, "model config JSON");
  init->add_option("--vocab", vocab, "byte | tiktoken | tiktoken:<path>");
  init->add_option("--frames", mc.n_audio_frames);
  init->add_option("--d-model", mc.d_model);
  init->add_option("--heads", mc.n_heads);
  init->add_option("--encoder-layers", mc.n_encoder_layers);
  init->add_option("--decoder-layers", mc.n_decoder_layers);
  init->add_option("--ff", mc.d_ff);
  init->add_option("--text-ctx", mc.n_text_ctx);
  init->add_option("--seed", seed);

  // synth
  auto* synth = app.add_subcommand("synth", "write a toy code-switched corpus");
  corpus::SynthConfig sc;
  synth->add_option("-o,--out", out_path)->required();
  synth->add_option("--train", sc.train_utterances);
  synth->add_option("--dev", sc.dev_utterances);
  synth->add_option("--test", sc.test_utterances);
  synth->add_option("--seed", sc.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*prepare) {
      const auto m = corpus::load_manifest(manifest_path);
      std::printf("%-12s %8s %9s %9s\n", "split", "utts", "hours", "han%");
      for (const auto& [name, s] : corpus::summarize(m))
        std::printf("%-12s %8zu %9.3f %9s\n", name.c_str(), s.utterances, s.hours,
                    s.tags.han_ratio ? mer_text(*s.tags.han_ratio * 100).c_str() : "-");
      std::printf("%-12s %8zu %9.3f\n", "total", m.size(), m.total_hours());
      if (verify) {
        const auto bad = corpus::verify_durations(m);
        for (const auto& b : bad)
          spdlog::warn("{}: manifest {:.3f}s, audio {}", b.utt_id, b.manifest_seconds,
                       b.audio_seconds ? std::to_string(*b.audio_seconds) + "s" : std::string("unreadable"));
        if (!bad.empty()) throw ConfigError(std::to_string(bad.size()) + " record(s) disagree with their audio");
      }
    } else if (*subset) {
      const auto m = load_split(manifest_path, split);
      const auto s = corpus::subset_by_duration(m, hours, seed);
      corpus::save_manifest(out_path, s);
      spdlog::info("{} of {} utterances, {:.4f} h", s.size(), m.size(), s.total_hours());
    } else if (*zero_shot || *finetune || *ablate) {
      const auto spec = load_spec(spec_path, spec_out);
      const auto opts = run_options();
      int rc = kOk;
      try {
        if (*zero_shot) {
          if (spec.strategies.empty()) spdlog::warn("no strategies configured");
          experiment::run_zero_shot(spec, opts);
        } else if (*finetune) {
          experiment::run_finetune_grid(spec, opts);
        } else {
          experiment::run_ablation(spec, opts);
        }
      } catch (const RuntimeFailure& e) {
        spdlog::error("{}", e.what());
        rc = kRuntimeFailure;
      }
      print_report(spec.output_dir);
      return rc;
    } else if (*decode_cmd) {
      if (!fs::is_directory(model_dir)) throw ConfigError("model directory not found: " + model_dir);
      auto model = nn::EncoderDecoderModel::load(model_dir);
      dc.strategy = prompt::PromptStrategy::parse(strategy_text);
      dc.validate();
      if (dc.strategy.kind == prompt::StrategyKind::kFused && !model.fused_token(dc.strategy.fused->label))
        prompt::install_fused_embedding(model, *dc.strategy.fused);
      const auto m = load_split(manifest_path, split);
      decode::BatchOptions bo;
      bo.output = out_path;
      bo.installed = model.fused_tokens();
      bo.limit = limit;
      std::size_t failed = 0;
      bo.on_hypothesis = [&](const decode::Hypothesis& h) {
        if (h.error) {
          ++failed;
          spdlog::warn("{}: {}", h.utt_id, *h.error);
        } else {
          spdlog::debug("{}: {}", h.utt_id, h.text);
        }
      };
      const auto hyps = decode::batch_transcribe(model, m, dc, bo);
      spdlog::info("{} hypotheses in {} ({} failed)", hyps.size(), out_path, failed);
    } else if (*score) {
      const auto m = load_split(manifest_path, split);
      const auto hyps = decode::load_hypotheses(hyp_path);
      const auto s = experiment::score_hypotheses(m, hyps);
      const auto& c = s.report.counts;
      std::printf("MER %s%%  N=%zu S=%zu D=%zu I=%zu  utterances=%zu failed=%zu runaway=%zu\n",
                  mer_text(s.report.mer).c_str(), c.n_ref, c.substitutions, c.deletions, c.insertions, m.size(),
                  s.failed, s.runaway);
      if (!json_out.empty()) {
        auto j = scoring::to_json(s.report);
        j["failed"] = s.failed;
        j["runaway"] = s.runaway;
        write_file_atomic(json_out, j.dump(2) + "\n");
      }
      if (!align_out.empty()) {
        std::map<std::string, std::string> by_id;
        for (const auto& h : hyps)
          if (!h.error) by_id[h.utt_id] = h.text;
        std::vector<scoring::TextPair> pairs;
        for (const auto& r : m.records()) pairs.push_back({r.utt_id, r.text, by_id[r.utt_id]});
        std::string text;
        for (const auto& u : scoring::score_pairs(pairs))
          text += scoring::alignment_dump(u) + "\n";
        write_file_atomic(align_out, text);
      }
    } else if (*report) {
      const fs::path dir = report_dir;
      if (!fs::exists(dir / "rows.jsonl")) throw ConfigError("no rows.jsonl in " + report_dir);
      const auto rows = experiment::load_rows(dir / "rows.jsonl");
      std::map<std::string, double> refs;
      if (fs::exists(dir / "spec.json")) {
        const auto spec = experiment::ExperimentSpec::from_json(nlohmann::json::parse(read_file(dir / "spec.json")), dir);
        refs = spec.ablation.references;
        for (const auto& r : rows)
          if (r.config_fingerprint != spec.fingerprint())
            spdlog::warn("row {} {} {} was produced by a different spec ({})", r.mode, r.slug, r.split,
                         r.config_fingerprint);
      }
      experiment::write_report(dir, rows, refs);
      if (rows.empty()) throw ConfigError("nothing to report: " + report_dir + "/rows.jsonl is empty");
      print_report(dir);
    } else if (*init) {
      if (!config_path.empty()) mc = nn::ModelConfig::from_json(nlohmann::json::parse(read_file(config_path)));
      mc.vocabulary = vocab;
      mc.validate();
      const auto model = nn::EncoderDecoderModel::initialize(mc, seed);
      model.save(out_path);
      spdlog::info("model ({} vocabulary, d_model {}) written to {}", mc.vocabulary, mc.d_model, out_path);
    } else if (*synth) {
      const auto m = corpus::synthesize_corpus(out_path, sc);
      spdlog::info("{} utterances, {:.4f} h in {}", m.size(), m.total_hours(), (fs::path(out_path) / "manifest.jsonl").string());
    }
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kConfigError;
  } catch (const nlohmann::json::exception& e) {
    spdlog::error("invalid JSON: {}", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kRuntimeFailure;
  }
  return kOk;
}

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

#include "cswhisper/decode/decode.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "cswhisper/audio/wav.hpp"
#include "cswhisper/common/error.hpp"
#include "cswhisper/common/files.hpp"
#include "cswhisper/text/utf8.hpp"

namespace csw::decode {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

void DecodeConfig::validate() const {
  if (beam_size != 1) throw ConfigError("only greedy decoding (beam size 1) is supported");
  if (max_output_tokens <= 0) throw ConfigError("max_output_tokens must be positive");
  const auto diags = prompt::validate_strategy(strategy);
  if (!diags.empty()) throw ConfigError("decode prompt: " + diags[0].field + ": " + diags[0].message);
}

ordered_json DecodeConfig::to_json() const {
  return {{"strategy", strategy.to_json()},
          {"beam_size", beam_size},
          {"max_output_tokens", max_output_tokens},
          {"suppress_special_outputs", suppress_special_outputs},
          {"no_timestamps", no_timestamps},
          {"fused_in_auto", fused_in_auto}};
}

DecodeConfig DecodeConfig::from_json(const json& j) {
  DecodeConfig c;
  try {
    if (j.contains("strategy")) c.strategy = prompt::PromptStrategy::from_json(j["strategy"]);
    c.beam_size = j.value("beam_size", c.beam_size);
    c.max_output_tokens = j.value("max_output_tokens", c.max_output_tokens);
    c.suppress_special_outputs = j.value("suppress_special_outputs", c.suppress_special_outputs);
    c.no_timestamps = j.value("no_timestamps", c.no_timestamps);
    c.fused_in_auto = j.value("fused_in_auto", c.fused_in_auto);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("decode config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

int argmax(std::span<const float> v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

std::vector<float> checked_logits(const nn::SequenceModel& model, const nn::Tensor& encoded,
                                  std::span<const int> prefix) {
  auto logits = model.next_token_logits(encoded, prefix);
  if (static_cast<int>(logits.size()) != model.vocabulary().size())
    throw RuntimeFailure("model produced " + std::to_string(logits.size()) + " logits for a vocabulary of " +
                         std::to_string(model.vocabulary().size()));
  return logits;
}

std::string clean_text(const text::Vocabulary& vocab, std::span<const int> ids) {
  return text::encode_utf8(text::decode_utf8(vocab.decode(ids)));
}

}  // namespace

Hypothesis transcribe(const nn::SequenceModel& model, const audio::FeatureMatrix& features,
                      const DecodeConfig& config, std::span<const nn::FusedTokenRecord> installed) {
  config.validate();
  const auto& vocab = model.vocabulary();
  const auto seq = prompt::build_prompt_sequence(config.strategy, vocab, installed, config.no_timestamps);
  for (int id : seq.token_ids)
    if (!vocab.contains(id))
      throw ConfigError("prompt token " + std::to_string(id) + " is outside the model's token table");
  if (static_cast<int>(seq.token_ids.size()) + 2 > model.text_context())
    throw ConfigError("prompt does not fit the model's text context");

  Hypothesis h;
  const auto encoded = model.encode_audio(features);
  h.token_ids = seq.decoder_prefix(vocab);

  if (config.strategy.kind == prompt::StrategyKind::kAuto) {
    const auto logits = checked_logits(model, encoded, h.token_ids);
    int best = -1;
    for (int id : vocab.language_token_ids()) {
      const bool fused = std::any_of(installed.begin(), installed.end(),
                                     [&](const nn::FusedTokenRecord& r) { return r.slot_token == id; });
      if (fused && !config.fused_in_auto) continue;
      if (best < 0 || logits[id] > logits[best]) best = id;
    }
    if (best < 0) throw ConfigError("no language token is available for detection");
    const auto fused = std::find_if(installed.begin(), installed.end(),
                                    [&](const nn::FusedTokenRecord& r) { return r.slot_token == best; });
    h.detected_language = fused != installed.end() ? fused->label : std::string(*vocab.language_of(best));
    // Auto prompt becomes sot, detected language, transcribe.
    h.token_ids.resize(1);
    h.token_ids.push_back(best);
    h.token_ids.push_back(vocab.transcribe());
    if (config.no_timestamps) h.token_ids.push_back(vocab.no_timestamps());
  }

  const std::size_t prompt_len = h.token_ids.size();
  int generated = 0;
  while (true) {
    if (generated >= config.max_output_tokens ||
        static_cast<int>(h.token_ids.size()) >= model.text_context()) {
      h.runaway = true;
      break;
    }
    auto logits = checked_logits(model, encoded, h.token_ids);
    if (config.suppress_special_outputs)
      for (int id = vocab.text_size(); id < vocab.size(); ++id)
        if (id != vocab.eot()) logits[id] = -std::numeric_limits<float>::infinity();
    const int next = argmax(logits);
    h.token_ids.push_back(next);
    if (next == vocab.eot()) break;
    ++generated;
  }
  h.text = clean_text(vocab, std::span<const int>(h.token_ids).subspan(prompt_len));
  return h;
}

ordered_json to_json(const Hypothesis& h) {
  ordered_json j;
  j["utt_id"] = h.utt_id;
  j["text"] = h.text;
  j["detected_language"] = h.detected_language ? ordered_json(*h.detected_language) : ordered_json(nullptr);
  j["token_ids"] = h.token_ids;
  j["runaway"] = h.runaway;
  if (h.error) j["error"] = *h.error;
  return j;
}

Hypothesis hypothesis_from_json(const json& j) {
  try {
    Hypothesis h;
    h.utt_id = j.at("utt_id").get<std::string>();
    h.text = j.at("text").get<std::string>();
    if (j.contains("detected_language") && !j["detected_language"].is_null())
      h.detected_language = j["detected_language"].get<std::string>();
    h.token_ids = j.value("token_ids", std::vector<int>{});
    h.runaway = j.value("runaway", false);
    if (j.contains("error")) h.error = j["error"].get<std::string>();
    return h;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad hypothesis record: ") + e.what());
  }
}

std::vector<Hypothesis> load_hypotheses(const fs::path& path) {
  std::vector<Hypothesis> out;
  if (!fs::exists(path)) return out;
  const std::string contents = read_file(path);
  std::size_t start = 0, line = 0;
  while (start < contents.size()) {
    const auto end = contents.find('\n', start);
    ++line;
    if (end == std::string::npos) {
      spdlog::warn("{}: ignoring unterminated last line", path.string());
      break;
    }
    const std::string_view text(contents.data() + start, end - start);
    start = end + 1;
    if (text.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(hypothesis_from_json(json::parse(text)));
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + " line " + std::to_string(line) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Hypothesis> batch_transcribe(const nn::SequenceModel& model, const corpus::CorpusManifest& manifest,
                                         const DecodeConfig& config, const BatchOptions& options) {
  config.validate();
  std::unordered_map<std::string, Hypothesis> done;
  if (!options.output.empty()) {
    for (auto& h : load_hypotheses(options.output)) done.emplace(h.utt_id, std::move(h));
    // Drop a torn last line so appends start on a fresh line.
    if (fs::exists(options.output)) {
      std::string contents = read_file(options.output);
      const auto cut = contents.rfind('\n');
      const std::size_t keep = cut == std::string::npos ? 0 : cut + 1;
      if (keep != contents.size()) write_file_atomic(options.output, contents.substr(0, keep));
    } else if (options.output.has_parent_path()) {
      fs::create_directories(options.output.parent_path());
    }
  }
  std::ofstream out;
  if (!options.output.empty()) {
    out.open(options.output, std::ios::binary | std::ios::app);
    if (!out) throw RuntimeFailure("cannot open " + options.output.string() + " for writing");
  }

  const auto& records = manifest.records();
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (!done.count(records[i].utt_id)) todo.push_back(i);
  if (options.limit && todo.size() > *options.limit) todo.resize(*options.limit);
  if (!done.empty()) spdlog::info("resuming: {} of {} utterances already decoded", done.size(), records.size());

  audio::FeatureConfig fc;
  const audio::LogMelExtractor extractor(fc);
  constexpr std::size_t kChunk = 16;
  for (std::size_t c0 = 0; c0 < todo.size(); c0 += kChunk) {
    const std::size_t c1 = std::min(todo.size(), c0 + kChunk);
    std::vector<audio::FeatureMatrix> feats(c1 - c0);
    std::vector<std::string> errors(c1 - c0);
    const int n = static_cast<int>(c1 - c0);
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < n; ++k) {
      const auto& r = records[todo[c0 + k]];
      try {
        feats[k] = extractor.extract(audio::read_wav(manifest.resolve_audio(r)), model.input_frames());
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
    for (int k = 0; k < n; ++k) {
      const auto& r = records[todo[c0 + k]];
      Hypothesis h;
      if (errors[k].empty()) {
        h = transcribe(model, feats[k], config, options.installed);
      } else {
        spdlog::warn("{}: {}", r.utt_id, errors[k]);
        h.error = errors[k];
      }
      h.utt_id = r.utt_id;
      if (out.is_open()) {
        out << to_json(h).dump() << '\n';
        out.flush();
        if (!out) throw RuntimeFailure("write failed for " + options.output.string());
      }
      if (options.on_hypothesis) options.on_hypothesis(h);
      done.emplace(h.utt_id, std::move(h));
    }
  }

  std::vector<Hypothesis> result;
  for (const auto& r : records) {
    auto it = done.find(r.utt_id);
    if (it != done.end()) result.push_back(it->second);
  }
  return result;
}

}  // namespace csw::decode

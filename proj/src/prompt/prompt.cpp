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

#include "cswhisper/prompt/prompt.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cswhisper/common/error.hpp"
#include "cswhisper/common/hash.hpp"

namespace csw::prompt {

using nlohmann::json;
using nlohmann::ordered_json;

const char* to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kOfficial: return "official";
    case StrategyKind::kAuto: return "auto";
    case StrategyKind::kCombined: return "combined";
    case StrategyKind::kFused: return "fused";
    case StrategyKind::kReference: return "reference";
  }
  return "?";
}

namespace {

StrategyKind kind_from_string(std::string_view s) {
  for (auto k : {StrategyKind::kOfficial, StrategyKind::kAuto, StrategyKind::kCombined,
                 StrategyKind::kFused, StrategyKind::kReference})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown prompt strategy '" + std::string(s) + "'");
}

std::vector<std::string> split_commas(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(',', start);
    if (end == std::string_view::npos) end = s.size();
    if (end > start) out.emplace_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

std::string joined(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

PromptStrategy PromptStrategy::official(std::string lang) {
  return {StrategyKind::kOfficial, {std::move(lang)}, std::nullopt};
}
PromptStrategy PromptStrategy::automatic() { return {StrategyKind::kAuto, {}, std::nullopt}; }
PromptStrategy PromptStrategy::combined(std::string first, std::string second) {
  return {StrategyKind::kCombined, {std::move(first), std::move(second)}, std::nullopt};
}
PromptStrategy PromptStrategy::fusion(FusedEmbeddingSpec spec) {
  return {StrategyKind::kFused, {}, std::move(spec)};
}
PromptStrategy PromptStrategy::reference(std::string lang) {
  return {StrategyKind::kReference, {std::move(lang)}, std::nullopt};
}

std::string PromptStrategy::symbol() const {
  switch (kind) {
    case StrategyKind::kAuto: return "Auto";
    case StrategyKind::kFused: return "<|" + (fused ? fused->label : std::string("?")) + "|>";
    default: {
      std::string out;
      for (const auto& l : languages) out += "<|" + l + "|>";
      return out;
    }
  }
}

std::string PromptStrategy::slug() const {
  switch (kind) {
    case StrategyKind::kAuto: return "auto";
    case StrategyKind::kFused: return "fused-" + (fused ? fused->label : std::string("none"));
    default: return std::string(to_string(kind)) + "-" + joined(languages, "-");
  }
}

ordered_json PromptStrategy::to_json() const {
  ordered_json j;
  j["kind"] = to_string(kind);
  switch (kind) {
    case StrategyKind::kOfficial:
    case StrategyKind::kReference:
      j["language"] = languages.empty() ? "" : languages[0];
      break;
    case StrategyKind::kCombined:
      j["languages"] = languages;
      break;
    case StrategyKind::kFused:
      if (fused) {
        j["sources"] = fused->sources;
        j["weights"] = fused->weights;
        j["slot"] = fused->slot;
        j["label"] = fused->label;
      }
      break;
    case StrategyKind::kAuto:
      break;
  }
  return j;
}

PromptStrategy PromptStrategy::from_json(const json& j) {
  if (j.is_string()) return parse(j.get<std::string>());
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    throw ConfigError("prompt strategy needs a string 'kind'");
  try {
    PromptStrategy s;
    s.kind = kind_from_string(j["kind"].get<std::string>());
    switch (s.kind) {
      case StrategyKind::kOfficial:
      case StrategyKind::kReference:
        s.languages = {j.at("language").get<std::string>()};
        break;
      case StrategyKind::kCombined:
        s.languages = j.at("languages").get<std::vector<std::string>>();
        break;
      case StrategyKind::kFused: {
        FusedEmbeddingSpec f;
        if (j.contains("sources")) f.sources = j["sources"].get<std::vector<std::string>>();
        if (j.contains("weights")) {
          f.weights = j["weights"].get<std::vector<double>>();
        } else {
          f.weights.assign(f.sources.size(), f.sources.empty() ? 0.0 : 1.0 / f.sources.size());
        }
        if (j.contains("slot")) f.slot = j["slot"].get<std::string>();
        f.label = j.contains("label") ? j["label"].get<std::string>() : joined(f.sources, "-");
        s.fused = std::move(f);
        break;
      }
      case StrategyKind::kAuto:
        break;
    }
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad prompt strategy: ") + e.what());
  }
}

PromptStrategy PromptStrategy::parse(std::string_view text) {
  const auto colon = text.find(':');
  const auto head = text.substr(0, colon);
  const auto args = colon == std::string_view::npos ? std::vector<std::string>{}
                                                    : split_commas(text.substr(colon + 1));
  const auto kind = kind_from_string(head);
  auto need = [&](std::size_t n) {
    if (args.size() != n)
      throw ConfigError("prompt '" + std::string(text) + "' needs " + std::to_string(n) + " language(s)");
  };
  switch (kind) {
    case StrategyKind::kOfficial: need(1); return official(args[0]);
    case StrategyKind::kReference: need(1); return reference(args[0]);
    case StrategyKind::kCombined: need(2); return combined(args[0], args[1]);
    case StrategyKind::kAuto: need(0); return automatic();
    case StrategyKind::kFused: {
      FusedEmbeddingSpec f;
      if (!args.empty()) {
        f.sources = args;
        f.weights.assign(args.size(), 1.0 / args.size());
        f.label = joined(args, "-");
      }
      return fusion(std::move(f));
    }
  }
  throw ConfigError("unreachable prompt kind");
}

std::vector<Diagnostic> validate_strategy(const PromptStrategy& s, const text::Vocabulary* vocab) {
  std::vector<Diagnostic> out;
  auto check_lang = [&](const std::string& field, const std::string& code) {
    if (code.empty()) {
      out.push_back({field, "language label is empty"});
    } else if (vocab && !vocab->language_token(code)) {
      out.push_back({field, "unknown language '" + code + "'"});
    }
  };
  switch (s.kind) {
    case StrategyKind::kOfficial:
    case StrategyKind::kReference:
      if (s.languages.size() != 1) out.push_back({"languages", "exactly one language required"});
      for (const auto& l : s.languages) check_lang("languages", l);
      break;
    case StrategyKind::kCombined:
      if (s.languages.size() != 2) {
        out.push_back({"languages", "exactly two languages required"});
      } else if (s.languages[0] == s.languages[1]) {
        out.push_back({"languages", "languages must be distinct"});
      }
      for (const auto& l : s.languages) check_lang("languages", l);
      break;
    case StrategyKind::kAuto:
      if (!s.languages.empty()) out.push_back({"languages", "auto takes no language"});
      break;
    case StrategyKind::kFused: {
      if (!s.fused) {
        out.push_back({"fused", "fused strategy needs a fusion spec"});
        break;
      }
      const auto& f = *s.fused;
      if (f.sources.empty()) out.push_back({"sources", "at least one source language required"});
      if (f.sources.size() != f.weights.size())
        out.push_back({"weights", "one weight per source language required"});
      double sum = 0.0;
      bool negative = false;
      for (double w : f.weights) {
        sum += w;
        negative |= !(w >= 0.0);
      }
      if (negative) out.push_back({"weights", "weights must be nonnegative"});
      if (std::abs(sum - 1.0) > 1e-9) out.push_back({"weights", "weights must sum to 1"});
      if (std::find(f.sources.begin(), f.sources.end(), f.slot) != f.sources.end())
        out.push_back({"slot", "slot must differ from every source language"});
      if (std::set<std::string>(f.sources.begin(), f.sources.end()).size() != f.sources.size())
        out.push_back({"sources", "source languages must be distinct"});
      if (f.label.empty()) out.push_back({"label", "fused label is empty"});
      for (const auto& l : f.sources) check_lang("sources", l);
      check_lang("slot", f.slot);
      break;
    }
  }
  return out;
}

namespace {

void throw_if_invalid(const PromptStrategy& s, const text::Vocabulary& vocab) {
  const auto diags = validate_strategy(s, &vocab);
  if (diags.empty()) return;
  std::string msg = "invalid prompt " + s.slug() + ":";
  for (const auto& d : diags) msg += " " + d.field + ": " + d.message + ";";
  throw ConfigError(msg);
}

}  // namespace

std::vector<int> PromptSequence::decoder_prefix(const text::Vocabulary& vocab) const {
  auto out = token_ids;
  if (no_timestamps) out.push_back(vocab.no_timestamps());
  return out;
}

PromptSequence build_prompt_sequence(const PromptStrategy& s, const text::Vocabulary& vocab,
                                     std::span<const nn::FusedTokenRecord> installed,
                                     bool no_timestamps) {
  throw_if_invalid(s, vocab);
  PromptSequence seq;
  seq.no_timestamps = no_timestamps;
  seq.token_ids.push_back(vocab.sot());
  switch (s.kind) {
    case StrategyKind::kAuto:
      return seq;
    case StrategyKind::kFused: {
      const auto it = std::find_if(installed.begin(), installed.end(),
                                   [&](const nn::FusedTokenRecord& r) { return r.label == s.fused->label; });
      if (it == installed.end())
        throw ConfigError("fused prompt <|" + s.fused->label + "|> is not installed in the model");
      seq.token_ids.push_back(it->slot_token);
      break;
    }
    default:
      for (const auto& l : s.languages) seq.token_ids.push_back(*vocab.language_token(l));
  }
  seq.token_ids.push_back(vocab.transcribe());
  return seq;
}

std::string render(std::span<const int> ids, const text::Vocabulary& vocab,
                   std::span<const nn::FusedTokenRecord> installed) {
  std::string out;
  for (int id : ids) {
    const auto fused = std::find_if(installed.begin(), installed.end(),
                                    [&](const nn::FusedTokenRecord& r) { return r.slot_token == id; });
    if (fused != installed.end()) {
      out += "<|" + fused->label + "|>";
    } else if (id == vocab.sot()) {
      out += "<|sot|>";
    } else if (id == vocab.transcribe()) {
      out += "<|asr|>";
    } else {
      out += vocab.token_label(id);
    }
  }
  return out;
}

ResolvedFusion resolve_fusion(const FusedEmbeddingSpec& spec, const text::Vocabulary& vocab) {
  throw_if_invalid(PromptStrategy::fusion(spec), vocab);
  ResolvedFusion r;
  for (const auto& l : spec.sources) r.source_tokens.push_back(*vocab.language_token(l));
  r.weights = spec.weights;
  r.slot_token = *vocab.language_token(spec.slot);
  r.label = spec.label;
  return r;
}

std::vector<float> build_fused_embedding(const nn::TokenEmbeddingTable& table, const ResolvedFusion& f) {
  if (table.data.size() != static_cast<std::size_t>(table.rows) * table.cols)
    throw ConfigError("embedding table size does not match its shape");
  std::vector<double> acc(table.cols, 0.0);
  for (std::size_t i = 0; i < f.source_tokens.size(); ++i) {
    const int id = f.source_tokens[i];
    if (id < 0 || id >= table.rows)
      throw ConfigError("source token " + std::to_string(id) + " outside the embedding table");
    const auto row = table.row(id);
    for (int c = 0; c < table.cols; ++c) acc[c] += f.weights[i] * static_cast<double>(row[c]);
  }
  return std::vector<float>(acc.begin(), acc.end());
}

std::string row_checksum(std::span<const float> row) {
  Fnv1a64 h;
  h.update(row);
  return h.hex();
}

std::vector<std::string> row_checksums(const nn::TokenEmbeddingTable& table) {
  std::vector<std::string> out(table.rows);
  for (int r = 0; r < table.rows; ++r) out[r] = row_checksum(table.row(r));
  return out;
}

InstallReceipt install_fused_embedding(nn::EncoderDecoderModel& model, const FusedEmbeddingSpec& spec) {
  const auto fusion = resolve_fusion(spec, model.vocabulary());
  auto table = model.token_embedding_table();
  if (table.read_only) throw RuntimeFailure("token embedding table is read-only");
  if (fusion.slot_token >= table.rows)
    throw ConfigError("slot token " + std::to_string(fusion.slot_token) + " outside the embedding table");
  const auto fused = build_fused_embedding(table, fusion);
  const auto slot = table.row(fusion.slot_token);

  InstallReceipt receipt;
  receipt.slot_token = fusion.slot_token;
  receipt.label = fusion.label;
  receipt.previous_row.assign(slot.begin(), slot.end());
  receipt.previous_checksum = row_checksum(slot);
  for (const auto& r : model.fused_tokens())
    if (r.slot_token == fusion.slot_token) receipt.previous_record = r;

  std::copy(fused.begin(), fused.end(), slot.begin());
  receipt.installed_checksum = row_checksum(slot);
  model.record_fused_token({fusion.label, fusion.slot_token, fusion.source_tokens, fusion.weights});
  return receipt;
}

void undo_install(nn::EncoderDecoderModel& model, const InstallReceipt& receipt) {
  auto table = model.token_embedding_table();
  if (table.read_only) throw RuntimeFailure("token embedding table is read-only");
  const auto slot = table.row(receipt.slot_token);
  if (row_checksum(slot) != receipt.installed_checksum)
    throw RuntimeFailure("slot row changed since the install; refusing to undo");
  std::copy(receipt.previous_row.begin(), receipt.previous_row.end(), slot.begin());
  model.forget_fused_token(receipt.slot_token);
  if (receipt.previous_record) model.record_fused_token(*receipt.previous_record);
}

}  // namespace csw::prompt

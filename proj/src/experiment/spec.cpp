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

#include "cswhisper/experiment/spec.hpp"

#include <cstdlib>
#include <set>

#include "cswhisper/common/error.hpp"
#include "cswhisper/common/files.hpp"
#include "cswhisper/common/hash.hpp"

namespace csw::experiment {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

corpus::CorpusManifest SplitRef::load() const {
  auto m = corpus::load_manifest(manifest);
  if (!filter) return m;
  auto sub = m.filter_split(*filter);
  if (sub.empty())
    throw ConfigError("split '" + *filter + "' of " + manifest.string() + " has no records");
  return sub;
}

namespace {

ordered_json split_json(const SplitRef& s) {
  ordered_json j{{"name", s.name}, {"manifest", s.manifest.string()}};
  if (s.filter) j["split"] = *s.filter;
  return j;
}

SplitRef split_from(const json& j, const fs::path& base, const std::string& default_name) {
  SplitRef s;
  if (j.is_string()) {
    s.manifest = j.get<std::string>();
    s.name = default_name;
  } else {
    s.manifest = j.at("manifest").get<std::string>();
    if (j.contains("split")) s.filter = j["split"].get<std::string>();
    s.name = j.value("name", s.filter.value_or(default_name));
  }
  if (s.manifest.is_relative()) s.manifest = base / s.manifest;
  s.manifest = s.manifest.lexically_normal();
  return s;
}

ordered_json strategies_json(const std::vector<prompt::PromptStrategy>& list) {
  ordered_json arr = ordered_json::array();
  for (const auto& s : list) arr.push_back(s.to_json());
  return arr;
}

std::vector<prompt::PromptStrategy> strategies_from(const json& j) {
  std::vector<prompt::PromptStrategy> out;
  for (const auto& s : j) out.push_back(prompt::PromptStrategy::from_json(s));
  return out;
}

}  // namespace

void ExperimentSpec::validate(const text::Vocabulary* vocab) const {
  std::vector<std::string> problems;
  if (name.empty()) problems.push_back("name is empty");
  auto check_strategies = [&](const std::vector<prompt::PromptStrategy>& list, const char* field) {
    for (const auto& s : list)
      for (const auto& d : prompt::validate_strategy(s, vocab))
        problems.push_back(std::string(field) + " " + s.slug() + ": " + d.field + ": " + d.message);
  };
  check_strategies(strategies, "strategies");
  check_strategies(finetune_strategies, "finetune_strategies");
  for (const auto& s : finetune_strategies)
    if (s.kind == prompt::StrategyKind::kAuto)
      problems.push_back("finetune_strategies: auto has no fixed prompt to train with");
  check_strategies({ablation.strategy}, "ablation.strategy");
  if (ablation.strategy.kind == prompt::StrategyKind::kAuto)
    problems.push_back("ablation.strategy: auto has no fixed prompt to train with");
  std::set<std::string> names;
  for (const auto& e : eval)
    if (!names.insert(e.name).second) problems.push_back("duplicate eval split name '" + e.name + "'");
  std::set<std::string> slugs;
  for (const auto& s : strategies)
    if (!slugs.insert(s.slug()).second) problems.push_back("duplicate strategy " + s.slug());
  slugs.clear();
  for (const auto& s : finetune_strategies)
    if (!slugs.insert(s.slug()).second) problems.push_back("duplicate finetune strategy " + s.slug());
  for (double h : ablation.hours)
    if (!(h > 0)) problems.push_back("ablation hours must be positive");
  if (ablation.max_steps <= training.warmup_steps) problems.push_back("ablation.max_steps must exceed warmup_steps");
  if (ablation.freeze.empty()) problems.push_back("ablation.freeze needs at least one variant");
  if (average_last <= 0) problems.push_back("average_last must be positive");
  try {
    training.validate();
  } catch (const ConfigError& e) {
    problems.push_back(e.what());
  }
  if (decode.beam_size != 1) problems.push_back("decode.beam_size must be 1");
  if (decode.max_output_tokens <= 0) problems.push_back("decode.max_output_tokens must be positive");
  if (problems.empty()) return;
  std::string msg = "experiment spec '" + name + "' is invalid:";
  for (const auto& p : problems) msg += "\n  - " + p;
  throw ConfigError(msg);
}

ordered_json ExperimentSpec::to_json() const {
  ordered_json j;
  j["name"] = name;
  j["model"] = model.string();
  j["train"] = train ? split_json(*train) : ordered_json(nullptr);
  j["eval"] = ordered_json::array();
  for (const auto& e : eval) j["eval"].push_back(split_json(e));
  j["strategies"] = strategies_json(strategies);
  j["finetune_strategies"] = strategies_json(finetune_strategies);
  j["training"] = training.to_json();
  auto d = decode.to_json();
  d.erase("strategy");
  j["decode"] = d;
  j["average_last"] = average_last;
  j["ablation"] = {{"hours", ablation.hours},
                   {"include_full", ablation.include_full},
                   {"freeze", ablation.freeze},
                   {"strategy", ablation.strategy.to_json()},
                   {"max_steps", ablation.max_steps},
                   {"subset_seed", ablation.subset_seed},
                   {"independent_subsets", ablation.independent_subsets},
                   {"references", ablation.references}};
  return j;
}

ExperimentSpec ExperimentSpec::from_json(const json& j, const fs::path& base) {
  if (!j.is_object()) throw ConfigError("experiment spec must be a JSON object");
  static const std::set<std::string> known{"name", "model", "train", "eval", "strategies", "finetune_strategies",
                                           "training", "decode", "average_last", "ablation", "output_dir"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("experiment spec: unknown key '" + it.key() + "'");
  ExperimentSpec s;
  try {
    s.name = j.at("name").get<std::string>();
    auto path = [&](const std::string& p) {
      fs::path out = p;
      return (out.is_relative() ? base / out : out).lexically_normal();
    };
    if (j.contains("model") && !j["model"].is_null()) s.model = path(j["model"].get<std::string>());
    if (j.contains("train") && !j["train"].is_null()) s.train = split_from(j["train"], base, "train");
    if (j.contains("eval"))
      for (const auto& e : j["eval"]) s.eval.push_back(split_from(e, base, "eval"));
    if (j.contains("strategies")) s.strategies = strategies_from(j["strategies"]);
    if (j.contains("finetune_strategies")) {
      s.finetune_strategies = strategies_from(j["finetune_strategies"]);
    } else {
      for (const auto& st : s.strategies)
        if (st.kind != prompt::StrategyKind::kAuto) s.finetune_strategies.push_back(st);
    }
    if (j.contains("training")) s.training = adapt::TrainingConfig::from_json(j["training"]);
    if (j.contains("decode")) {
      auto d = j["decode"];
      d.erase("strategy");
      s.decode = decode::DecodeConfig::from_json(d);
    }
    s.average_last = j.value("average_last", s.average_last);
    if (j.contains("ablation")) {
      const auto& a = j["ablation"];
      s.ablation.hours = a.value("hours", s.ablation.hours);
      s.ablation.include_full = a.value("include_full", s.ablation.include_full);
      s.ablation.freeze = a.value("freeze", s.ablation.freeze);
      if (a.contains("strategy")) s.ablation.strategy = prompt::PromptStrategy::from_json(a["strategy"]);
      s.ablation.max_steps = a.value("max_steps", s.ablation.max_steps);
      s.ablation.subset_seed = a.value("subset_seed", s.ablation.subset_seed);
      s.ablation.independent_subsets = a.value("independent_subsets", s.ablation.independent_subsets);
      s.ablation.references = a.value("references", s.ablation.references);
    }
    s.output_dir = j.contains("output_dir") ? path(j["output_dir"].get<std::string>()) : base / ("runs-" + s.name);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::string ExperimentSpec::fingerprint() const { return to_hex(fnv1a64(to_json().dump())); }

ExperimentSpec load_spec(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return ExperimentSpec::from_json(j, fs::absolute(path).parent_path());
}

void apply_environment(ExperimentSpec& spec) {
  if (const char* dev = std::getenv("CSW_DEVICE"); dev && *dev && std::string(dev) != "cpu")
    throw ConfigError(std::string("CSW_DEVICE=") + dev + " is not available; only cpu is supported");
  if (const char* dir = std::getenv("CSW_MODEL_DIR"); dir && *dir && spec.model.empty()) spec.model = dir;
  if (const char* seed = std::getenv("CSW_SEED"); seed && *seed) {
    try {
      std::size_t used = 0;
      spec.training.seed = std::stoull(seed, &used);
      if (used != std::string(seed).size()) throw std::invalid_argument(seed);
    } catch (const std::exception&) {
      throw ConfigError(std::string("CSW_SEED must be a nonnegative integer, got '") + seed + "'");
    }
  }
}

}  // namespace csw::experiment

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

#include "cswhisper/nn/model.hpp"

#include <cmath>
#include <random>

#include "cswhisper/common/error.hpp"
#include "cswhisper/common/files.hpp"
#include "cswhisper/common/random.hpp"
#include "cswhisper/nn/ops.hpp"

namespace csw::nn {

namespace fs = std::filesystem;

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw ConfigError(std::string("model config: ") + name + " must be positive");
  };
  positive(n_mels, "n_mels");
  positive(n_audio_frames, "n_audio_frames");
  positive(d_model, "d_model");
  positive(n_heads, "n_heads");
  positive(n_encoder_layers, "n_encoder_layers");
  positive(n_decoder_layers, "n_decoder_layers");
  positive(d_ff, "d_ff");
  positive(n_text_ctx, "n_text_ctx");
  if (n_audio_frames % 2 != 0) throw ConfigError("model config: n_audio_frames must be even");
  if (d_model % n_heads != 0) throw ConfigError("model config: d_model must divide by n_heads");
  if (d_model % 2 != 0) throw ConfigError("model config: d_model must be even");
}

nlohmann::ordered_json ModelConfig::to_json() const {
  return {{"vocabulary", vocabulary},         {"n_mels", n_mels},
          {"n_audio_frames", n_audio_frames}, {"d_model", d_model},
          {"n_heads", n_heads},               {"n_encoder_layers", n_encoder_layers},
          {"n_decoder_layers", n_decoder_layers}, {"d_ff", d_ff},
          {"n_text_ctx", n_text_ctx}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.vocabulary = j.value("vocabulary", c.vocabulary);
    c.n_mels = j.value("n_mels", c.n_mels);
    c.n_audio_frames = j.value("n_audio_frames", c.n_audio_frames);
    c.d_model = j.value("d_model", c.d_model);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.n_encoder_layers = j.value("n_encoder_layers", c.n_encoder_layers);
    c.n_decoder_layers = j.value("n_decoder_layers", c.n_decoder_layers);
    c.d_ff = j.value("d_ff", c.d_ff);
    c.n_text_ctx = j.value("n_text_ctx", c.n_text_ctx);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

const char* to_string(ParameterGroup group) {
  switch (group) {
    case ParameterGroup::kEncoder: return "encoder";
    case ParameterGroup::kDecoder: return "decoder";
    case ParameterGroup::kEmbedding: return "embedding";
  }
  return "?";
}

ParameterGroup group_of(std::string_view name) {
  if (name.starts_with("encoder.")) return ParameterGroup::kEncoder;
  if (name.starts_with("decoder.")) return ParameterGroup::kDecoder;
  return ParameterGroup::kEmbedding;
}

EncoderDecoderModel::EncoderDecoderModel(ModelConfig config,
                                         std::shared_ptr<const text::Vocabulary> vocab)
    : config_(std::move(config)), vocab_(std::move(vocab)) {
  config_.validate();
  // Fixed sinusoidal positions for the encoder, [frames/2, d_model].
  const int positions = config_.n_audio_frames / 2;
  const int half = config_.d_model / 2;
  const double increment = std::log(10000.0) / std::max(1, half - 1);
  std::vector<float> pos(static_cast<std::size_t>(positions) * config_.d_model);
  for (int t = 0; t < positions; ++t)
    for (int c = 0; c < half; ++c) {
      const double angle = t * std::exp(-increment * c);
      pos[static_cast<std::size_t>(t) * config_.d_model + c] = static_cast<float>(std::sin(angle));
      pos[static_cast<std::size_t>(t) * config_.d_model + half + c] = static_cast<float>(std::cos(angle));
    }
  encoder_positions_ = Tensor::from_values(positions, config_.d_model, std::move(pos));
}

void EncoderDecoderModel::build(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int d = config_.d_model;
  auto normal = [&](int rows, int cols, double stddev) {
    std::vector<float> v(static_cast<std::size_t>(rows) * cols);
    for (float& x : v) x = static_cast<float>(stddev * standard_normal(rng));
    return v;
  };
  auto add = [&](std::string name, int rows, int cols, std::vector<float> values) {
    const auto group = group_of(name);
    params_.push_back({std::move(name), group, Tensor::parameter(rows, cols, std::move(values))});
  };
  auto add_linear = [&](const std::string& prefix, int out, int in) {
    add(prefix + ".weight", out, in, normal(out, in, 1.0 / std::sqrt(static_cast<double>(in))));
    add(prefix + ".bias", 1, out, std::vector<float>(out, 0.0f));
  };
  auto add_norm = [&](const std::string& prefix) {
    add(prefix + ".weight", 1, d, std::vector<float>(d, 1.0f));
    add(prefix + ".bias", 1, d, std::vector<float>(d, 0.0f));
  };
  auto add_attention = [&](const std::string& prefix) {
    for (const char* proj : {"query", "key", "value", "out"}) add_linear(prefix + "." + proj, d, d);
  };
  auto add_mlp = [&](const std::string& prefix) {
    add_linear(prefix + ".fc1", config_.d_ff, d);
    add_linear(prefix + ".fc2", d, config_.d_ff);
  };

  add("token_embedding.weight", vocab_->size(), d, normal(vocab_->size(), d, 0.02));
  add_linear("encoder.stem", d, 2 * config_.n_mels);
  for (int i = 0; i < config_.n_encoder_layers; ++i) {
    const std::string b = "encoder.blocks." + std::to_string(i);
    add_norm(b + ".attn_ln");
    add_attention(b + ".attn");
    add_norm(b + ".mlp_ln");
    add_mlp(b + ".mlp");
  }
  add_norm("encoder.ln_post");
  add("decoder.positional_embedding", config_.n_text_ctx, d, normal(config_.n_text_ctx, d, 0.02));
  for (int i = 0; i < config_.n_decoder_layers; ++i) {
    const std::string b = "decoder.blocks." + std::to_string(i);
    add_norm(b + ".attn_ln");
    add_attention(b + ".attn");
    add_norm(b + ".cross_attn_ln");
    add_attention(b + ".cross_attn");
    add_norm(b + ".mlp_ln");
    add_mlp(b + ".mlp");
  }
  add_norm("decoder.ln");
  index();
}

void EncoderDecoderModel::index() {
  by_name_.clear();
  for (std::size_t i = 0; i < params_.size(); ++i) by_name_.emplace(params_[i].name, i);
}

EncoderDecoderModel EncoderDecoderModel::initialize(const ModelConfig& config, std::uint64_t seed) {
  EncoderDecoderModel m(config, text::make_vocabulary(config.vocabulary));
  m.build(seed);
  return m;
}

EncoderDecoderModel EncoderDecoderModel::clone() const {
  EncoderDecoderModel m(config_, vocab_);
  for (const auto& p : params_) {
    std::vector<float> values(p.tensor.values().begin(), p.tensor.values().end());
    Tensor t = Tensor::parameter(p.tensor.rows(), p.tensor.cols(), std::move(values));
    t.set_requires_grad(p.tensor.requires_grad());
    m.params_.push_back({p.name, p.group, t});
  }
  m.index();
  m.embedding_read_only_ = embedding_read_only_;
  m.fused_ = fused_;
  return m;
}

Tensor& EncoderDecoderModel::parameter(std::string_view name) {
  const auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) throw ConfigError("unknown parameter: " + std::string(name));
  return params_[it->second].tensor;
}

const Tensor& EncoderDecoderModel::parameter(std::string_view name) const {
  return const_cast<EncoderDecoderModel*>(this)->parameter(name);
}

ParameterSnapshot EncoderDecoderModel::snapshot() const {
  ParameterSnapshot s;
  s.arrays.reserve(params_.size());
  for (const auto& p : params_)
    s.arrays.push_back({p.name, p.tensor.rows(), p.tensor.cols(),
                        std::vector<float>(p.tensor.values().begin(), p.tensor.values().end())});
  return s;
}

void EncoderDecoderModel::restore(const ParameterSnapshot& snapshot) {
  if (snapshot.arrays.size() != params_.size())
    throw ConfigError("snapshot has " + std::to_string(snapshot.arrays.size()) +
                      " arrays, model has " + std::to_string(params_.size()));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& a = snapshot.arrays[i];
    auto& p = params_[i];
    if (a.name != p.name || a.rows != p.tensor.rows() || a.cols != p.tensor.cols())
      throw ConfigError("snapshot array '" + a.name + "' does not match parameter '" + p.name + "'");
  }
  for (std::size_t i = 0; i < params_.size(); ++i)
    std::copy(snapshot.arrays[i].data.begin(), snapshot.arrays[i].data.end(),
              params_[i].tensor.values().begin());
}

TokenEmbeddingTable EncoderDecoderModel::token_embedding_table() {
  Tensor& e = parameter("token_embedding.weight");
  return {e.values(), e.rows(), e.cols(), embedding_read_only_, true};
}

void EncoderDecoderModel::record_fused_token(FusedTokenRecord record) {
  forget_fused_token(record.slot_token);
  std::erase_if(fused_, [&](const FusedTokenRecord& r) { return r.label == record.label; });
  fused_.push_back(std::move(record));
}

void EncoderDecoderModel::forget_fused_token(int slot_token) {
  std::erase_if(fused_, [&](const FusedTokenRecord& r) { return r.slot_token == slot_token; });
}

std::optional<int> EncoderDecoderModel::fused_token(std::string_view label) const {
  for (const auto& r : fused_)
    if (r.label == label) return r.slot_token;
  return std::nullopt;
}

namespace {

struct Layer {
  const EncoderDecoderModel& m;
  Precision precision;

  Tensor p(const std::string& name) const { return m.parameter(name); }
  Tensor cast(const Tensor& t) const { return precision == Precision::kMixed ? round_half(t) : t; }
  Tensor lin(const Tensor& x, const std::string& prefix) const {
    return linear(cast(x), cast(p(prefix + ".weight")), p(prefix + ".bias"));
  }
  Tensor norm(const Tensor& x, const std::string& prefix) const {
    return layer_norm(x, p(prefix + ".weight"), p(prefix + ".bias"));
  }
  Tensor attend(const Tensor& x, const Tensor& context, const std::string& prefix, bool causal) const {
    const Tensor q = lin(x, prefix + ".query");
    const Tensor k = lin(context, prefix + ".key");
    const Tensor v = lin(context, prefix + ".value");
    return lin(attention(q, k, v, m.config().n_heads, causal), prefix + ".out");
  }
  Tensor mlp(const Tensor& x, const std::string& prefix) const {
    return lin(gelu(lin(x, prefix + ".fc1")), prefix + ".fc2");
  }
};

}  // namespace

Tensor EncoderDecoderModel::encode(const audio::FeatureMatrix& features, Precision precision) const {
  if (features.n_mels != config_.n_mels || features.frames != config_.n_audio_frames)
    throw ConfigError("features are " + std::to_string(features.frames) + "x" +
                      std::to_string(features.n_mels) + ", model expects " +
                      std::to_string(config_.n_audio_frames) + "x" + std::to_string(config_.n_mels));
  const Layer L{*this, precision};
  const int positions = config_.n_audio_frames / 2;
  Tensor x = Tensor::from_values(positions, 2 * config_.n_mels, features.data);
  x = nn::add(gelu(L.lin(x, "encoder.stem")), encoder_positions_);
  for (int i = 0; i < config_.n_encoder_layers; ++i) {
    const std::string b = "encoder.blocks." + std::to_string(i);
    const Tensor h = L.norm(x, b + ".attn_ln");
    x = nn::add(x, L.attend(h, h, b + ".attn", false));
    x = nn::add(x, L.mlp(L.norm(x, b + ".mlp_ln"), b + ".mlp"));
  }
  return L.norm(x, "encoder.ln_post");
}

Tensor EncoderDecoderModel::decoder_hidden(const Tensor& encoded, std::span<const int> tokens,
                                           Precision precision) const {
  const int t = static_cast<int>(tokens.size());
  if (t == 0 || t > config_.n_text_ctx)
    throw ConfigError("decoder input length " + std::to_string(t) + " outside [1, " +
                      std::to_string(config_.n_text_ctx) + "]");
  const Layer L{*this, precision};
  Tensor x = nn::add(embedding(parameter("token_embedding.weight"), tokens),
                     slice_rows(parameter("decoder.positional_embedding"), 0, t));
  for (int i = 0; i < config_.n_decoder_layers; ++i) {
    const std::string b = "decoder.blocks." + std::to_string(i);
    const Tensor h = L.norm(x, b + ".attn_ln");
    x = nn::add(x, L.attend(h, h, b + ".attn", true));
    x = nn::add(x, L.attend(L.norm(x, b + ".cross_attn_ln"), encoded, b + ".cross_attn", false));
    x = nn::add(x, L.mlp(L.norm(x, b + ".mlp_ln"), b + ".mlp"));
  }
  return L.norm(x, "decoder.ln");
}

Tensor EncoderDecoderModel::logits(const Tensor& encoded, std::span<const int> tokens,
                                   Precision precision) const {
  const Layer L{*this, precision};
  return matmul_nt(L.cast(decoder_hidden(encoded, tokens, precision)),
                   L.cast(parameter("token_embedding.weight")));
}

Tensor EncoderDecoderModel::encode_audio(const audio::FeatureMatrix& features) const {
  NoGradGuard guard;
  return encode(features, Precision::kFull);
}

std::vector<float> EncoderDecoderModel::next_token_logits(const Tensor& encoded,
                                                          std::span<const int> prefix) const {
  NoGradGuard guard;
  const Tensor h = decoder_hidden(encoded, prefix, Precision::kFull);
  const Tensor last = slice_rows(h, h.rows() - 1, 1);
  const Tensor out = matmul_nt(last, parameter("token_embedding.weight"));
  return {out.values().begin(), out.values().end()};
}

void EncoderDecoderModel::save(const fs::path& dir) const {
  fs::create_directories(dir);
  nlohmann::ordered_json meta;
  meta["format"] = "cswhisper-model-1";
  meta["config"] = config_.to_json();
  meta["fused_tokens"] = nlohmann::ordered_json::array();
  for (const auto& f : fused_)
    meta["fused_tokens"].push_back({{"label", f.label},
                                    {"slot_token", f.slot_token},
                                    {"source_tokens", f.source_tokens},
                                    {"weights", f.weights}});
  save_snapshot(dir / "params.bin", snapshot());
  write_file_atomic(dir / "config.json", meta.dump(2) + "\n");
}

EncoderDecoderModel EncoderDecoderModel::load(const fs::path& dir) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_file(dir / "config.json"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model config.json: " + std::string(e.what()));
  }
  if (meta.value("format", "") != "cswhisper-model-1")
    throw ConfigError("not a cswhisper model directory: " + dir.string());
  EncoderDecoderModel m = initialize(ModelConfig::from_json(meta.at("config")), 0);
  m.restore(load_snapshot(dir / "params.bin"));
  for (const auto& f : meta.value("fused_tokens", nlohmann::json::array()))
    m.fused_.push_back({f.at("label").get<std::string>(), f.at("slot_token").get<int>(),
                        f.at("source_tokens").get<std::vector<int>>(),
                        f.at("weights").get<std::vector<double>>()});
  return m;
}

}  // namespace csw::nn

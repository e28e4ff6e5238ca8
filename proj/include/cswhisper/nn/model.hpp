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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "cswhisper/audio/features.hpp"
#include "cswhisper/nn/snapshot.hpp"
#include "cswhisper/nn/tensor.hpp"
#include "cswhisper/text/vocabulary.hpp"

namespace csw::nn {

enum class Precision {
  kFull,   ///< float32 throughout
  kMixed,  ///< binary16 working copies of weights and activations in matmuls
};

/// Shape of a Whisper-style encoder-decoder. Defaults describe a desk-scale
/// model; the encoder stem stacks two mel frames per position, so
/// `n_audio_frames` must be even.
struct ModelConfig {
  std::string vocabulary = "byte";
  int n_mels = 80;
  int n_audio_frames = 200;
  int d_model = 64;
  int n_heads = 4;
  int n_encoder_layers = 2;
  int n_decoder_layers = 2;
  int d_ff = 256;
  int n_text_ctx = 96;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

/// Interface the decoder needs from a model: encode once, then score the next
/// token for a growing prefix.
class SequenceModel {
 public:
  virtual ~SequenceModel() = default;
  virtual const text::Vocabulary& vocabulary() const = 0;
  virtual int text_context() const = 0;
  virtual int input_frames() const = 0;
  virtual Tensor encode_audio(const audio::FeatureMatrix& features) const = 0;
  virtual std::vector<float> next_token_logits(const Tensor& encoded,
                                               std::span<const int> prefix) const = 0;
};

enum class ParameterGroup { kEncoder, kDecoder, kEmbedding };
const char* to_string(ParameterGroup group);

struct Parameter {
  std::string name;
  ParameterGroup group;
  Tensor tensor;
};

/// Mutable view of the token-embedding matrix, [rows = vocab, cols = d_model].
struct TokenEmbeddingTable {
  std::span<float> data;
  int rows = 0;
  int cols = 0;
  bool read_only = false;
  /// The output projection reads the same storage, so edits show up in logits.
  bool tied_output = false;

  std::span<float> row(int id) const {
    return data.subspan(static_cast<std::size_t>(id) * cols, static_cast<std::size_t>(cols));
  }
};

/// Record of a fused language token living in a sacrificed slot.
struct FusedTokenRecord {
  std::string label;
  int slot_token = -1;
  std::vector<int> source_tokens;
  std::vector<double> weights;
};

/// Whisper-like encoder-decoder with tied input/output token embeddings.
/// Not copyable (parameters are shared handles); use clone().
class EncoderDecoderModel final : public SequenceModel {
 public:
  static EncoderDecoderModel initialize(const ModelConfig& config, std::uint64_t seed);
  /// Reads `config.json` and `params.bin` from a model directory.
  static EncoderDecoderModel load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;

  EncoderDecoderModel(EncoderDecoderModel&&) = default;
  EncoderDecoderModel& operator=(EncoderDecoderModel&&) = default;
  EncoderDecoderModel clone() const;

  const ModelConfig& config() const { return config_; }
  std::shared_ptr<const text::Vocabulary> vocabulary_ptr() const { return vocab_; }

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  Tensor& parameter(std::string_view name);
  const Tensor& parameter(std::string_view name) const;

  ParameterSnapshot snapshot() const;
  /// Copies values in; names and shapes must match exactly.
  void restore(const ParameterSnapshot& snapshot);

  TokenEmbeddingTable token_embedding_table();
  void set_embedding_read_only(bool read_only) { embedding_read_only_ = read_only; }

  const std::vector<FusedTokenRecord>& fused_tokens() const { return fused_; }
  void record_fused_token(FusedTokenRecord record);
  void forget_fused_token(int slot_token);
  /// Slot id of an installed fused token with this label.
  std::optional<int> fused_token(std::string_view label) const;

  Tensor encode(const audio::FeatureMatrix& features, Precision precision) const;
  /// Logits for every position of `tokens`, [tokens.size(), vocab].
  Tensor logits(const Tensor& encoded, std::span<const int> tokens, Precision precision) const;

  // SequenceModel
  const text::Vocabulary& vocabulary() const override { return *vocab_; }
  int text_context() const override { return config_.n_text_ctx; }
  int input_frames() const override { return config_.n_audio_frames; }
  Tensor encode_audio(const audio::FeatureMatrix& features) const override;
  std::vector<float> next_token_logits(const Tensor& encoded,
                                       std::span<const int> prefix) const override;

 private:
  EncoderDecoderModel(ModelConfig config, std::shared_ptr<const text::Vocabulary> vocab);
  void build(std::uint64_t seed);
  void index();
  Tensor decoder_hidden(const Tensor& encoded, std::span<const int> tokens, Precision p) const;

  ModelConfig config_;
  std::shared_ptr<const text::Vocabulary> vocab_;
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> by_name_;
  Tensor encoder_positions_;
  bool embedding_read_only_ = false;
  std::vector<FusedTokenRecord> fused_;
};

/// Name-based split used for freezing: `encoder.*`, `decoder.*`, and the
/// shared token embedding.
ParameterGroup group_of(std::string_view parameter_name);

}  // namespace csw::nn

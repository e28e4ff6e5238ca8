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

#include <memory>
#include <span>
#include <vector>

#include "cswhisper/audio/wav.hpp"

namespace csw::audio {

struct FeatureConfig {
  int sample_rate = 16000;
  int n_mels = 80;
  int window = 400;  ///< 25 ms at 16 kHz
  int hop = 160;     ///< 10 ms at 16 kHz
};

/// Row-major [frames, n_mels] log-mel matrix.
struct FeatureMatrix {
  int frames = 0;
  int n_mels = 0;
  std::vector<float> data;

  std::span<const float> row(int frame) const {
    return std::span<const float>(data).subspan(static_cast<std::size_t>(frame) * n_mels, n_mels);
  }
  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

/// Slaney-style mel filterbank, [n_mels, n_fft/2 + 1] row-major, area
/// normalized. Matches the 80-bin table Whisper ships.
std::vector<float> mel_filterbank(int sample_rate, int n_fft, int n_mels);

/// floor((samples - window) / hop) + 1, or 0 when the input is shorter than
/// one window. No centering or reflection padding.
int frame_count(std::size_t samples, const FeatureConfig& config);

/// Whisper-style log-mel front end: periodic Hann window, power spectrum,
/// mel projection, log10 with a 1e-10 floor, dynamic range clamped to 8
/// decades below the peak, then (x + 4) / 4.
class LogMelExtractor {
 public:
  explicit LogMelExtractor(FeatureConfig config = {});

  const FeatureConfig& config() const { return config_; }
  const std::vector<float>& filterbank() const { return filters_; }

  /// Throws ConfigError on empty audio or a sample-rate mismatch.
  FeatureMatrix extract(const Waveform& wave) const;
  /// extract() followed by pad_or_trim to `target_frames`.
  FeatureMatrix extract(const Waveform& wave, int target_frames) const;

  /// Per-frame power spectra, [frames, window/2 + 1]. OpenMP over frames.
  std::vector<float> power_spectrum(std::span<const float> samples) const;

 private:
  FeatureMatrix finish(std::vector<float> power, int frames) const;

  FeatureConfig config_;
  std::vector<float> window_;
  std::vector<float> filters_;
  std::shared_ptr<void> plan_;
};

namespace serial {
/// Reference for LogMelExtractor::power_spectrum: one frame at a time.
std::vector<float> power_spectrum(const LogMelExtractor& extractor, std::span<const float> samples);
}  // namespace serial

/// Pads with `pad_value` rows or drops trailing frames.
FeatureMatrix pad_or_trim(const FeatureMatrix& features, int target_frames, float pad_value);

}  // namespace csw::audio

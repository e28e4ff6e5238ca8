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
#include <vector>

namespace csw::audio {

struct Waveform {
  int sample_rate = 16000;
  std::vector<float> samples;  ///< mono, nominally in [-1, 1]

  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

struct WavInfo {
  int sample_rate = 0;
  int channels = 0;
  int bits_per_sample = 0;
  std::size_t frames = 0;
  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(frames) / sample_rate : 0.0;
  }
};

/// RIFF/WAVE reader for 16-bit PCM and 32-bit float. Multi-channel input is
/// averaged down to mono. Throws RuntimeFailure on unreadable files.
Waveform read_wav(const std::filesystem::path& path);
WavInfo read_wav_info(const std::filesystem::path& path);

/// Writes 16-bit PCM mono, clipping to [-1, 1].
void write_wav(const std::filesystem::path& path, const Waveform& wave);

}  // namespace csw::audio

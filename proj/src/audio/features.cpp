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

#include "cswhisper/audio/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "cswhisper/common/error.hpp"
#include "cswhisper/kernels/gemm.hpp"

namespace csw::audio {

namespace {

double hz_to_mel(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (hz < min_log_hz) return hz / f_sp;
  return min_log_mel + std::log(hz / min_log_hz) / logstep;
}

double mel_to_hz(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (mel < min_log_mel) return f_sp * mel;
  return min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// Windowed real DFT of one frame -> |X|^2 into `out` (window/2 + 1 bins).
void frame_power(const float* samples, const std::vector<float>& window, fftwf_plan plan,
                 float* out) {
  const auto n = window.size();
  std::vector<float> buf(n);
  std::vector<fftwf_complex> spec(n / 2 + 1);
  for (std::size_t i = 0; i < n; ++i) buf[i] = samples[i] * window[i];
  fftwf_execute_dft_r2c(plan, buf.data(), spec.data());
  for (std::size_t k = 0; k < spec.size(); ++k) out[k] = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
}

}  // namespace

std::vector<float> mel_filterbank(int sample_rate, int n_fft, int n_mels) {
  const int bins = n_fft / 2 + 1;
  std::vector<double> fft_freqs(bins);
  for (int k = 0; k < bins; ++k) fft_freqs[k] = (sample_rate / 2.0) * k / (bins - 1);
  const double mel_lo = hz_to_mel(0.0);
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> mel_f(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    mel_f[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));

  std::vector<float> weights(static_cast<std::size_t>(n_mels) * bins, 0.0f);
  for (int m = 0; m < n_mels; ++m) {
    const double lower_span = mel_f[m + 1] - mel_f[m];
    const double upper_span = mel_f[m + 2] - mel_f[m + 1];
    const double enorm = 2.0 / (mel_f[m + 2] - mel_f[m]);
    for (int k = 0; k < bins; ++k) {
      const double lower = (fft_freqs[k] - mel_f[m]) / lower_span;
      const double upper = (mel_f[m + 2] - fft_freqs[k]) / upper_span;
      weights[static_cast<std::size_t>(m) * bins + k] =
          static_cast<float>(std::max(0.0, std::min(lower, upper)) * enorm);
    }
  }
  return weights;
}

int frame_count(std::size_t samples, const FeatureConfig& config) {
  if (samples < static_cast<std::size_t>(config.window)) return 0;
  return static_cast<int>((samples - config.window) / config.hop) + 1;
}

LogMelExtractor::LogMelExtractor(FeatureConfig config)
    : config_(config), filters_(mel_filterbank(config.sample_rate, config.window, config.n_mels)) {
  window_.resize(config_.window);
  for (int i = 0; i < config_.window; ++i)
    window_[i] = static_cast<float>(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / config_.window));
  std::vector<float> in(config_.window);
  std::vector<fftwf_complex> out(config_.window / 2 + 1);
  std::lock_guard lock(planner_mutex());
  fftwf_plan plan = fftwf_plan_dft_r2c_1d(config_.window, in.data(), out.data(),
                                          FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!plan) throw RuntimeFailure("FFTW could not create a plan");
  plan_ = std::shared_ptr<void>(plan, [](void* p) {
    std::lock_guard lock(planner_mutex());
    fftwf_destroy_plan(static_cast<fftwf_plan>(p));
  });
}

std::vector<float> LogMelExtractor::power_spectrum(std::span<const float> samples) const {
  const int frames = frame_count(samples.size(), config_);
  const int bins = config_.window / 2 + 1;
  std::vector<float> power(static_cast<std::size_t>(frames) * bins);
  auto plan = static_cast<fftwf_plan>(plan_.get());
#pragma omp parallel for schedule(static)
  for (int f = 0; f < frames; ++f)
    frame_power(samples.data() + static_cast<std::size_t>(f) * config_.hop, window_, plan,
                power.data() + static_cast<std::size_t>(f) * bins);
  return power;
}

namespace serial {
std::vector<float> power_spectrum(const LogMelExtractor& extractor, std::span<const float> samples) {
  const auto& cfg = extractor.config();
  const int frames = frame_count(samples.size(), cfg);
  const int bins = cfg.window / 2 + 1;
  std::vector<float> window(cfg.window);
  for (int i = 0; i < cfg.window; ++i)
    window[i] = static_cast<float>(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / cfg.window));
  std::vector<float> in(cfg.window);
  std::vector<fftwf_complex> out(bins);
  fftwf_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftwf_plan_dft_r2c_1d(cfg.window, in.data(), out.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  std::vector<float> power(static_cast<std::size_t>(frames) * bins);
  for (int f = 0; f < frames; ++f)
    frame_power(samples.data() + static_cast<std::size_t>(f) * cfg.hop, window, plan,
                power.data() + static_cast<std::size_t>(f) * bins);
  std::lock_guard lock(planner_mutex());
  fftwf_destroy_plan(plan);
  return power;
}
}  // namespace serial

FeatureMatrix LogMelExtractor::finish(std::vector<float> power, int frames) const {
  const int bins = config_.window / 2 + 1;
  FeatureMatrix fm;
  fm.frames = frames;
  fm.n_mels = config_.n_mels;
  fm.data.resize(static_cast<std::size_t>(frames) * config_.n_mels);
  kernels::gemm_nt(power, filters_, fm.data, frames, bins, config_.n_mels);
  float peak = -std::numeric_limits<float>::infinity();
  for (float& v : fm.data) {
    v = std::log10(std::max(v, 1e-10f));
    peak = std::max(peak, v);
  }
  const float floor = peak - 8.0f;
  for (float& v : fm.data) v = (std::max(v, floor) + 4.0f) / 4.0f;
  return fm;
}

FeatureMatrix LogMelExtractor::extract(const Waveform& wave) const {
  if (wave.samples.empty()) throw ConfigError("cannot extract features from empty audio");
  if (wave.sample_rate != config_.sample_rate)
    throw ConfigError("sample rate " + std::to_string(wave.sample_rate) + " Hz, expected " +
                      std::to_string(config_.sample_rate) + " Hz");
  const int frames = frame_count(wave.samples.size(), config_);
  if (frames == 0) throw ConfigError("audio shorter than one analysis window");
  return finish(power_spectrum(wave.samples), frames);
}

FeatureMatrix LogMelExtractor::extract(const Waveform& wave, int target_frames) const {
  FeatureMatrix fm = extract(wave);
  // What zero-valued samples would produce: the clamp floor, or the 1e-10
  // log floor when the dynamic range is narrower than 8 decades.
  const float peak = *std::max_element(fm.data.begin(), fm.data.end());
  const float pad = std::max(peak - 2.0f, -1.5f);
  return pad_or_trim(fm, target_frames, pad);
}

FeatureMatrix pad_or_trim(const FeatureMatrix& features, int target_frames, float pad_value) {
  FeatureMatrix out;
  out.frames = target_frames;
  out.n_mels = features.n_mels;
  out.data.assign(static_cast<std::size_t>(target_frames) * features.n_mels, pad_value);
  const int keep = std::min(target_frames, features.frames);
  std::copy_n(features.data.begin(), static_cast<std::size_t>(keep) * features.n_mels, out.data.begin());
  return out;
}

}  // namespace csw::audio

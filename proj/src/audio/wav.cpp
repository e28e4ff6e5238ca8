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

#include "cswhisper/audio/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "cswhisper/common/error.hpp"
#include "cswhisper/common/files.hpp"

namespace csw::audio {

namespace {

std::uint32_t u32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (std::uint32_t(p[3]) << 24);
}
std::uint16_t u16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

struct Parsed {
  WavInfo info;
  int format = 0;
  std::size_t data_offset = 0;
  std::size_t data_size = 0;
};

Parsed parse_header(const std::string& bytes, const std::filesystem::path& path) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    throw RuntimeFailure("not a RIFF/WAVE file: " + path.string());
  Parsed out;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = u32(p + pos + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(p + pos, "fmt ", 4) == 0 && body + 16 <= bytes.size()) {
      out.format = u16(p + body);
      out.info.channels = u16(p + body + 2);
      out.info.sample_rate = static_cast<int>(u32(p + body + 4));
      out.info.bits_per_sample = u16(p + body + 14);
      if (out.format == 0xFFFE && size >= 40 && body + 26 <= bytes.size())
        out.format = u16(p + body + 24);  // WAVE_FORMAT_EXTENSIBLE subformat
      have_fmt = true;
    } else if (std::memcmp(p + pos, "data", 4) == 0) {
      out.data_offset = body;
      out.data_size = std::min<std::size_t>(size, bytes.size() - body);
      break;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt || out.data_offset == 0)
    throw RuntimeFailure("WAVE file missing fmt or data chunk: " + path.string());
  if (out.info.channels <= 0 || out.info.bits_per_sample <= 0)
    throw RuntimeFailure("WAVE file has invalid format fields: " + path.string());
  const bool pcm16 = out.format == 1 && out.info.bits_per_sample == 16;
  const bool f32 = out.format == 3 && out.info.bits_per_sample == 32;
  if (!pcm16 && !f32)
    throw RuntimeFailure("unsupported WAVE encoding (need PCM16 or float32): " + path.string());
  out.info.frames = out.data_size / (static_cast<std::size_t>(out.info.channels) *
                                     (out.info.bits_per_sample / 8));
  return out;
}

std::string slurp(const std::filesystem::path& path) {
  try {
    return read_file(path);
  } catch (const ConfigError& e) {
    throw RuntimeFailure(e.what());
  }
}

}  // namespace

WavInfo read_wav_info(const std::filesystem::path& path) {
  return parse_header(slurp(path), path).info;
}

Waveform read_wav(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  const Parsed h = parse_header(bytes, path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + h.data_offset;
  const int ch = h.info.channels;
  Waveform w;
  w.sample_rate = h.info.sample_rate;
  w.samples.resize(h.info.frames);
  for (std::size_t f = 0; f < h.info.frames; ++f) {
    float acc = 0.0f;
    for (int c = 0; c < ch; ++c) {
      const std::size_t idx = f * ch + c;
      if (h.format == 1) {
        acc += static_cast<float>(static_cast<std::int16_t>(u16(p + 2 * idx))) / 32768.0f;
      } else {
        float v;
        std::memcpy(&v, p + 4 * idx, 4);
        acc += v;
      }
    }
    w.samples[f] = acc / static_cast<float>(ch);
  }
  return w;
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  auto put32 = [&out](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  auto put16 = [&out](std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
  };
  out += "RIFF";
  put32(36 + data_bytes);
  out += "WAVEfmt ";
  put32(16);
  put16(1);
  put16(1);
  put32(static_cast<std::uint32_t>(wave.sample_rate));
  put32(static_cast<std::uint32_t>(wave.sample_rate * 2));
  put16(2);
  put16(16);
  out += "data";
  put32(data_bytes);
  for (float s : wave.samples) {
    const float c = std::clamp(s, -1.0f, 1.0f);
    put16(static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lrint(c * 32767.0f))));
  }
  write_file_atomic(path, out);
}

}  // namespace csw::audio

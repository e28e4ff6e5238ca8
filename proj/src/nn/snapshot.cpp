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

#include "cswhisper/nn/snapshot.hpp"

#include <cstdint>
#include <cstring>

#include "cswhisper/common/error.hpp"
#include "cswhisper/common/files.hpp"
#include "cswhisper/common/hash.hpp"

namespace csw::nn {

namespace {
constexpr char kMagic[8] = {'C', 'S', 'W', 'S', 'N', 'A', 'P', '1'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::filesystem::path& path) : bytes_(bytes), path_(path) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void read_floats(float* dst, std::size_t count) {
    need(count * sizeof(float));
    std::memcpy(dst, bytes_.data() + pos_, count * sizeof(float));
    pos_ += count * sizeof(float);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw RuntimeFailure("truncated snapshot: " + path_.string());
  }
  const std::string& bytes_;
  std::filesystem::path path_;
  std::size_t pos_ = 0;
};
}  // namespace

std::string NamedArray::checksum() const {
  Fnv1a64 h;
  h.update(std::span<const float>(data));
  return h.hex();
}

const NamedArray* ParameterSnapshot::find(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

bool ParameterSnapshot::same_shapes(const ParameterSnapshot& other) const {
  if (arrays.size() != other.arrays.size()) return false;
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    const auto& a = arrays[i];
    const auto& b = other.arrays[i];
    if (a.name != b.name || a.rows != b.rows || a.cols != b.cols) return false;
  }
  return true;
}

void save_snapshot(const std::filesystem::path& path, const ParameterSnapshot& snapshot) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(snapshot.arrays.size()));
  for (const auto& a : snapshot.arrays) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(a.name.size()));
    out += a.name;
    put<std::int32_t>(out, a.rows);
    put<std::int32_t>(out, a.cols);
    out.append(reinterpret_cast<const char*>(a.data.data()), a.data.size() * sizeof(float));
  }
  write_file_atomic(path, out);
}

ParameterSnapshot load_snapshot(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const ConfigError& e) {
    throw RuntimeFailure(e.what());
  }
  Reader r(bytes, path);
  if (r.take(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
    throw RuntimeFailure("not a parameter snapshot: " + path.string());
  ParameterSnapshot snap;
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.take(r.get<std::uint32_t>());
    a.rows = r.get<std::int32_t>();
    a.cols = r.get<std::int32_t>();
    if (a.rows < 0 || a.cols < 0) throw RuntimeFailure("corrupt snapshot shape: " + path.string());
    a.data.resize(static_cast<std::size_t>(a.rows) * a.cols);
    r.read_floats(a.data.data(), a.data.size());
    snap.arrays.push_back(std::move(a));
  }
  if (!r.done()) throw RuntimeFailure("trailing bytes in snapshot: " + path.string());
  return snap;
}

}  // namespace csw::nn

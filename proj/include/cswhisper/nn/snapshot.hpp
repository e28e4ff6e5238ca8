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
#include <string>
#include <vector>

namespace csw::nn {

struct NamedArray {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::vector<float> data;

  std::string checksum() const;
  friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

/// Full copy of a model's parameters, detached from any graph.
struct ParameterSnapshot {
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
  bool same_shapes(const ParameterSnapshot& other) const;
  friend bool operator==(const ParameterSnapshot&, const ParameterSnapshot&) = default;
};

/// Binary layout: "CSWSNAP1", u32 count, then per array u32 name length,
/// name bytes, i32 rows, i32 cols, rows*cols little-endian float32.
void save_snapshot(const std::filesystem::path& path, const ParameterSnapshot& snapshot);
ParameterSnapshot load_snapshot(const std::filesystem::path& path);

}  // namespace csw::nn

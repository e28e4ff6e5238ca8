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

#include <stdexcept>
#include <string>

namespace csw {

/// Base class for every error the toolkit raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: malformed manifests, invalid configs, unresolvable labels.
/// The CLI maps these to exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Failures while running (I/O, non-finite loss, ...). Exit code 2.
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace csw

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

#include <span>

/// Dense row-major matrix products used by the model's forward and backward
/// passes. Each entry point exists twice: `serial::` is the reference loop
/// nest, the unqualified one splits output rows across OpenMP threads. Both
/// sum every output element in the same order, so results are bitwise equal
/// for any thread count.
namespace csw::kernels {

enum class Accumulate : bool { kOverwrite = false, kAdd = true };

namespace serial {

/// C[m,n] (+)= A[m,k] * B[k,n]
void gemm_nn(std::span<const float> a, std::span<const float> b, std::span<float> c,
             int m, int k, int n, Accumulate acc = Accumulate::kOverwrite);
/// C[m,n] (+)= A[m,k] * B[n,k]^T
void gemm_nt(std::span<const float> a, std::span<const float> b, std::span<float> c,
             int m, int k, int n, Accumulate acc = Accumulate::kOverwrite);
/// C[m,n] (+)= A[k,m]^T * B[k,n]
void gemm_tn(std::span<const float> a, std::span<const float> b, std::span<float> c,
             int m, int k, int n, Accumulate acc = Accumulate::kOverwrite);

}  // namespace serial

void gemm_nn(std::span<const float> a, std::span<const float> b, std::span<float> c,
             int m, int k, int n, Accumulate acc = Accumulate::kOverwrite);
void gemm_nt(std::span<const float> a, std::span<const float> b, std::span<float> c,
             int m, int k, int n, Accumulate acc = Accumulate::kOverwrite);
void gemm_tn(std::span<const float> a, std::span<const float> b, std::span<float> c,
             int m, int k, int n, Accumulate acc = Accumulate::kOverwrite);

/// Threads the parallel kernels will use (omp_get_max_threads, or 1 without OpenMP).
int max_threads();

}  // namespace csw::kernels

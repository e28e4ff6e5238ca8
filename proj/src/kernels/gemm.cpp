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

#include "cswhisper/kernels/gemm.hpp"

#include <algorithm>
#include <cassert>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace csw::kernels {

namespace {

// Row kernels shared by both variants; the drivers only differ in how rows
// are distributed.

inline void row_nn(const float* __restrict a, const float* __restrict b, float* __restrict c, int k, int n,
                   Accumulate acc) {
  if (acc == Accumulate::kOverwrite) std::fill(c, c + n, 0.0f);
  for (int p = 0; p < k; ++p) {
    const float av = a[p];
    const float* brow = b + static_cast<std::ptrdiff_t>(p) * n;
    for (int j = 0; j < n; ++j) c[j] += av * brow[j];
  }
}

inline void row_nt(const float* a, const float* b, float* c, int k, int n, Accumulate acc) {
  for (int j = 0; j < n; ++j) {
    const float* brow = b + static_cast<std::ptrdiff_t>(j) * k;
    float s = acc == Accumulate::kAdd ? c[j] : 0.0f;
    for (int p = 0; p < k; ++p) s += a[p] * brow[p];
    c[j] = s;
  }
}

// Row i of A^T * B: sum over t of A[t,i] * B[t,:].
inline void row_tn(const float* __restrict a, const float* __restrict b, float* __restrict c, int i, int m,
                   int k, int n, Accumulate acc) {
  if (acc == Accumulate::kOverwrite) std::fill(c, c + n, 0.0f);
  for (int t = 0; t < k; ++t) {
    const float av = a[static_cast<std::ptrdiff_t>(t) * m + i];
    if (av == 0.0f) continue;
    const float* brow = b + static_cast<std::ptrdiff_t>(t) * n;
    for (int j = 0; j < n; ++j) c[j] += av * brow[j];
  }
}

void check(std::span<const float> a, std::span<const float> b, std::span<float> c,
           std::size_t a_size, std::size_t b_size, std::size_t c_size) {
  (void)a; (void)b; (void)c; (void)a_size; (void)b_size; (void)c_size;
  assert(a.size() >= a_size && b.size() >= b_size && c.size() >= c_size);
}

}  // namespace

namespace serial {

void gemm_nn(std::span<const float> a, std::span<const float> b, std::span<float> c, int m,
             int k, int n, Accumulate acc) {
  check(a, b, c, std::size_t(m) * k, std::size_t(k) * n, std::size_t(m) * n);
  for (int i = 0; i < m; ++i)
    row_nn(a.data() + std::ptrdiff_t(i) * k, b.data(), c.data() + std::ptrdiff_t(i) * n, k, n, acc);
}

void gemm_nt(std::span<const float> a, std::span<const float> b, std::span<float> c, int m,
             int k, int n, Accumulate acc) {
  check(a, b, c, std::size_t(m) * k, std::size_t(n) * k, std::size_t(m) * n);
  for (int i = 0; i < m; ++i)
    row_nt(a.data() + std::ptrdiff_t(i) * k, b.data(), c.data() + std::ptrdiff_t(i) * n, k, n, acc);
}

void gemm_tn(std::span<const float> a, std::span<const float> b, std::span<float> c, int m,
             int k, int n, Accumulate acc) {
  check(a, b, c, std::size_t(k) * m, std::size_t(k) * n, std::size_t(m) * n);
  for (int i = 0; i < m; ++i)
    row_tn(a.data(), b.data(), c.data() + std::ptrdiff_t(i) * n, i, m, k, n, acc);
}

}  // namespace serial

void gemm_nn(std::span<const float> a, std::span<const float> b, std::span<float> c, int m,
             int k, int n, Accumulate acc) {
  check(a, b, c, std::size_t(m) * k, std::size_t(k) * n, std::size_t(m) * n);
#pragma omp parallel for schedule(static) if (std::size_t(m) * k * n > 32768)
  for (int i = 0; i < m; ++i)
    row_nn(a.data() + std::ptrdiff_t(i) * k, b.data(), c.data() + std::ptrdiff_t(i) * n, k, n, acc);
}

void gemm_nt(std::span<const float> a, std::span<const float> b, std::span<float> c, int m,
             int k, int n, Accumulate acc) {
  check(a, b, c, std::size_t(m) * k, std::size_t(n) * k, std::size_t(m) * n);
#pragma omp parallel for schedule(static) if (std::size_t(m) * k * n > 32768)
  for (int i = 0; i < m; ++i)
    row_nt(a.data() + std::ptrdiff_t(i) * k, b.data(), c.data() + std::ptrdiff_t(i) * n, k, n, acc);
}

void gemm_tn(std::span<const float> a, std::span<const float> b, std::span<float> c, int m,
             int k, int n, Accumulate acc) {
  check(a, b, c, std::size_t(k) * m, std::size_t(k) * n, std::size_t(m) * n);
#pragma omp parallel for schedule(static) if (std::size_t(m) * k * n > 32768)
  for (int i = 0; i < m; ++i)
    row_tn(a.data(), b.data(), c.data() + std::ptrdiff_t(i) * n, i, m, k, n, acc);
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace csw::kernels

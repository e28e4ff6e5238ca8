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

#include "cswhisper/nn/tensor.hpp"

/// Differentiable operations over 2-D tensors. Each op computes its forward
/// value eagerly and, when any input requires grad (and grad mode is on),
/// records a backward closure.
namespace csw::nn {

Tensor matmul(const Tensor& a, const Tensor& b);     ///< [m,k] x [k,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  ///< [m,k] x [n,k]^T
/// x[m,in] * w[out,in]^T + bias[1,out]; `bias` may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);
Tensor add(const Tensor& a, const Tensor& b);
Tensor gelu(const Tensor& x);  ///< exact (erf) form
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);
Tensor reshape(const Tensor& x, int rows, int cols);
Tensor slice_rows(const Tensor& x, int start, int count);
/// Rows of `table` gathered by id.
Tensor embedding(const Tensor& table, std::span<const int> ids);
/// Multi-head scaled dot-product attention; q[m,d], k/v[n,d]. With `causal`,
/// query i only sees keys 0..i.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads, bool causal);
/// scale * sum over rows with target >= 0 of -log softmax(logits[row])[target].
Tensor cross_entropy_sum(const Tensor& logits, std::span<const int> targets, float scale);
/// Rounds values to binary16 going forward and gradients to binary16 going
/// back, emulating a half-precision working copy.
Tensor round_half(const Tensor& x);

}  // namespace csw::nn

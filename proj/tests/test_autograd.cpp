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

#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "cswhisper/kernels/half.hpp"
#include "cswhisper/nn/ops.hpp"

using namespace csw::nn;

namespace {

std::vector<float> randn(std::size_t n, std::mt19937& rng, float sd = 1.0f) {
  std::normal_distribution<float> nd(0.0f, sd);
  std::vector<float> v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

// Reduces any tensor to a scalar with fixed random weights so every output
// element contributes a distinct gradient.
Tensor weighted_sum(const Tensor& t, std::uint32_t seed) {
  std::mt19937 rng(seed);
  const auto w = Tensor::from_values(t.rows() * t.cols(), 1, randn(t.numel(), rng));
  return matmul(reshape(t, 1, t.rows() * t.cols()), w);
}

// Central differences against backward() for every element of every input.
void check_gradients(std::vector<Tensor> inputs, const std::function<Tensor(std::vector<Tensor>&)>& f,
                     float step = 1e-2f, float tol = 2e-2f) {
  for (auto& t : inputs) t.zero_grad();
  backward(f(inputs));
  for (auto& t : inputs) {
    std::vector<float> analytic(t.grad().begin(), t.grad().end());
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const float saved = t.values()[i];
      float up, down;
      {
        NoGradGuard g;
        t.values()[i] = saved + step;
        up = f(inputs).item();
        t.values()[i] = saved - step;
        down = f(inputs).item();
      }
      t.values()[i] = saved;
      const float numeric = (up - down) / (2 * step);
      INFO("element " << i);
      REQUIRE(analytic[i] == doctest::Approx(numeric).epsilon(tol).scale(1.0));
    }
  }
}

}  // namespace

TEST_CASE("matmul forward") {
  const auto a = Tensor::from_values(2, 3, {1, 2, 3, 4, 5, 6});
  const auto b = Tensor::from_values(3, 2, {7, 8, 9, 10, 11, 12});
  const auto c = matmul(a, b);
  CHECK(std::vector<float>(c.values().begin(), c.values().end()) == std::vector<float>{58, 64, 139, 154});
  const auto bt = Tensor::from_values(2, 3, {7, 9, 11, 8, 10, 12});
  const auto d = matmul_nt(a, bt);
  CHECK(std::vector<float>(d.values().begin(), d.values().end()) == std::vector<float>{58, 64, 139, 154});
}

TEST_CASE("gradients of elementary ops") {
  std::mt19937 rng(1);
  auto p = [&](int r, int c) { return Tensor::parameter(r, c, randn(r * c, rng, 0.7f)); };

  SUBCASE("matmul") {
    check_gradients({p(3, 4), p(4, 2)}, [](auto& in) { return weighted_sum(matmul(in[0], in[1]), 1); });
  }
  SUBCASE("matmul_nt") {
    check_gradients({p(3, 4), p(5, 4)}, [](auto& in) { return weighted_sum(matmul_nt(in[0], in[1]), 2); });
  }
  SUBCASE("linear with bias") {
    check_gradients({p(3, 4), p(5, 4), p(1, 5)},
                    [](auto& in) { return weighted_sum(linear(in[0], in[1], in[2]), 3); });
  }
  SUBCASE("linear without bias") {
    check_gradients({p(2, 3), p(4, 3)}, [](auto& in) { return weighted_sum(linear(in[0], in[1], {}), 4); });
  }
  SUBCASE("add") {
    check_gradients({p(3, 4), p(3, 4)}, [](auto& in) { return weighted_sum(add(in[0], in[1]), 5); });
  }
  SUBCASE("gelu") {
    check_gradients({p(3, 5)}, [](auto& in) { return weighted_sum(gelu(in[0]), 6); });
  }
  SUBCASE("layer_norm") {
    check_gradients({p(3, 6), p(1, 6), p(1, 6)},
                    [](auto& in) { return weighted_sum(layer_norm(in[0], in[1], in[2]), 7); });
  }
  SUBCASE("slice_rows and reshape") {
    check_gradients({p(5, 4)}, [](auto& in) { return weighted_sum(reshape(slice_rows(in[0], 1, 3), 2, 6), 8); });
  }
  SUBCASE("embedding with repeated ids") {
    const std::vector<int> ids{2, 0, 2, 3};
    check_gradients({p(5, 3)}, [&](auto& in) { return weighted_sum(embedding(in[0], ids), 9); });
  }
  SUBCASE("attention, causal and not") {
    for (bool causal : {false, true}) {
      check_gradients({p(4, 8), p(4, 8), p(4, 8)},
                      [&](auto& in) { return weighted_sum(attention(in[0], in[1], in[2], 2, causal), 10); });
    }
  }
  SUBCASE("cross-attention shapes") {
    check_gradients({p(3, 8), p(6, 8), p(6, 8)},
                    [](auto& in) { return weighted_sum(attention(in[0], in[1], in[2], 4, false), 11); });
  }
  SUBCASE("cross entropy with ignored rows") {
    const std::vector<int> targets{1, -1, 4};
    check_gradients({p(3, 5)}, [&](auto& in) { return cross_entropy_sum(in[0], targets, 0.5f); });
  }
}

TEST_CASE("cross entropy value") {
  const auto logits = Tensor::from_values(2, 3, {0, 0, 0, 1, 2, 3});
  const std::vector<int> targets{0, 2};
  const float want = std::log(3.0f) + (std::log(std::exp(1.f) + std::exp(2.f) + std::exp(3.f)) - 3.f);
  CHECK(cross_entropy_sum(logits, targets, 1.0f).item() == doctest::Approx(want));
  const std::vector<int> none{-1, -1};
  CHECK(cross_entropy_sum(logits, none, 1.0f).item() == 0.0f);
}

TEST_CASE("causal attention ignores future keys") {
  std::mt19937 rng(3);
  auto q = Tensor::from_values(3, 4, randn(12, rng));
  auto k = Tensor::from_values(3, 4, randn(12, rng));
  auto v = Tensor::from_values(3, 4, randn(12, rng));
  const auto before = attention(q, k, v, 1, true);
  k.values()[8] += 5.0f;  // last key row
  v.values()[9] += 5.0f;
  const auto after = attention(q, k, v, 1, true);
  for (int i = 0; i < 8; ++i) CHECK(before.values()[i] == after.values()[i]);
}

TEST_CASE("round_half rounds forward values and backward gradients") {
  auto x = Tensor::parameter(1, 2, {0.1f, 1.0f});
  const auto y = round_half(x);
  CHECK(y.values()[0] == csw::kernels::round_to_half(0.1f));
  backward(matmul(y, Tensor::from_values(2, 1, {0.1f, 70000.0f})));
  CHECK(x.grad()[0] == csw::kernels::round_to_half(0.1f));
  CHECK(std::isinf(x.grad()[1]));
}

TEST_CASE("no-grad mode records nothing and gradients accumulate across calls") {
  auto w = Tensor::parameter(2, 2, {1, 2, 3, 4});
  {
    NoGradGuard g;
    CHECK_FALSE(grad_enabled());
    const auto y = matmul(w, w);
    CHECK(y.node()->inputs.empty());
  }
  CHECK(grad_enabled());
  const auto ones = Tensor::from_values(4, 1, {1, 1, 1, 1});
  backward(matmul(reshape(w, 1, 4), ones));
  backward(matmul(reshape(w, 1, 4), ones), 3.0f);
  for (float g : w.grad()) CHECK(g == 4.0f);
}

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

#include "cswhisper/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "cswhisper/kernels/gemm.hpp"
#include "cswhisper/kernels/half.hpp"

namespace csw::nn {

namespace {

using detail::Node;
using kernels::Accumulate;

bool tracks(std::initializer_list<const Tensor*> inputs) {
  if (!grad_enabled()) return false;
  for (const Tensor* t : inputs)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

Tensor result(int rows, int cols, std::vector<float> value,
              std::initializer_list<const Tensor*> inputs, std::function<void(Node&)> fn) {
  Tensor out = Tensor::from_values(rows, cols, std::move(value));
  if (tracks(inputs)) {
    auto& node = *out.node();
    node.requires_grad = true;
    for (const Tensor* t : inputs) node.inputs.push_back(t->defined() ? t->node() : nullptr);
    std::erase(node.inputs, nullptr);
    node.backward_fn = std::move(fn);
  }
  return out;
}

// Grad buffer of an input if it participates in backprop, else nullptr.
std::vector<float>* grad_of(const std::shared_ptr<Node>& n) {
  return n && n->requires_grad ? &n->ensure_grad() : nullptr;
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  const int m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<float> out(static_cast<std::size_t>(m) * n);
  kernels::gemm_nn(a.values(), b.values(), out, m, k, n);
  auto an = a.node(), bn = b.node();
  return result(m, n, std::move(out), {&a, &b}, [an, bn, m, k, n](Node& self) {
    if (auto* ga = grad_of(an)) kernels::gemm_nt(self.grad, bn->value, *ga, m, n, k, Accumulate::kAdd);
    if (auto* gb = grad_of(bn)) kernels::gemm_tn(an->value, self.grad, *gb, k, m, n, Accumulate::kAdd);
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.cols(), "matmul_nt: inner dimensions differ");
  const int m = a.rows(), k = a.cols(), n = b.rows();
  std::vector<float> out(static_cast<std::size_t>(m) * n);
  kernels::gemm_nt(a.values(), b.values(), out, m, k, n);
  auto an = a.node(), bn = b.node();
  return result(m, n, std::move(out), {&a, &b}, [an, bn, m, k, n](Node& self) {
    if (auto* ga = grad_of(an)) kernels::gemm_nn(self.grad, bn->value, *ga, m, n, k, Accumulate::kAdd);
    if (auto* gb = grad_of(bn)) kernels::gemm_tn(self.grad, an->value, *gb, n, m, k, Accumulate::kAdd);
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require(x.cols() == w.cols(), "linear: input width differs from weight");
  const int m = x.rows(), in = x.cols(), out_dim = w.rows();
  std::vector<float> out(static_cast<std::size_t>(m) * out_dim);
  kernels::gemm_nt(x.values(), w.values(), out, m, in, out_dim);
  if (bias.defined()) {
    require(static_cast<int>(bias.numel()) == out_dim, "linear: bias size");
    const auto b = bias.values();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < out_dim; ++j) out[static_cast<std::size_t>(i) * out_dim + j] += b[j];
  }
  auto xn = x.node(), wn = w.node();
  auto bn = bias.defined() ? bias.node() : nullptr;
  return result(m, out_dim, std::move(out), {&x, &w, &bias}, [xn, wn, bn, m, in, out_dim](Node& self) {
    if (auto* gx = grad_of(xn)) kernels::gemm_nn(self.grad, wn->value, *gx, m, out_dim, in, Accumulate::kAdd);
    if (auto* gw = grad_of(wn)) kernels::gemm_tn(self.grad, xn->value, *gw, out_dim, m, in, Accumulate::kAdd);
    if (auto* gb = grad_of(bn)) {
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < out_dim; ++j) (*gb)[j] += self.grad[static_cast<std::size_t>(i) * out_dim + j];
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  std::vector<float> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  auto an = a.node(), bn = b.node();
  return result(a.rows(), a.cols(), std::move(out), {&a, &b}, [an, bn](Node& self) {
    for (auto& n : {an, bn})
      if (auto* g = grad_of(n))
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
  });
}

Tensor gelu(const Tensor& x) {
  const auto xv = x.values();
  std::vector<float> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i)
    out[i] = 0.5f * xv[i] * (1.0f + std::erf(xv[i] * static_cast<float>(std::numbers::sqrt2 / 2)));
  auto xn = x.node();
  return result(x.rows(), x.cols(), std::move(out), {&x}, [xn](Node& self) {
    auto* g = grad_of(xn);
    if (!g) return;
    const float inv_sqrt_2pi = static_cast<float>(1.0 / std::sqrt(2.0 * std::numbers::pi));
    for (std::size_t i = 0; i < g->size(); ++i) {
      const float v = xn->value[i];
      const float cdf = 0.5f * (1.0f + std::erf(v * static_cast<float>(std::numbers::sqrt2 / 2)));
      const float pdf = inv_sqrt_2pi * std::exp(-0.5f * v * v);
      (*g)[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  const int m = x.rows(), d = x.cols();
  require(static_cast<int>(gamma.numel()) == d && static_cast<int>(beta.numel()) == d,
          "layer_norm: affine size");
  const auto xv = x.values();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  auto xhat = std::make_shared<std::vector<float>>(xv.size());
  auto inv_std = std::make_shared<std::vector<float>>(m);
  std::vector<float> out(xv.size());
  for (int i = 0; i < m; ++i) {
    const float* row = xv.data() + static_cast<std::size_t>(i) * d;
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += row[j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= d;
    const float is = static_cast<float>(1.0 / std::sqrt(var + eps));
    (*inv_std)[i] = is;
    for (int j = 0; j < d; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * d + j;
      (*xhat)[idx] = static_cast<float>(row[j] - mean) * is;
      out[idx] = (*xhat)[idx] * gv[j] + bv[j];
    }
  }
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  return result(m, d, std::move(out), {&x, &gamma, &beta}, [xn, gn, bn, xhat, inv_std, m, d](Node& self) {
    auto* gx = grad_of(xn);
    auto* gg = grad_of(gn);
    auto* gb = grad_of(bn);
    for (int i = 0; i < m; ++i) {
      const std::size_t base = static_cast<std::size_t>(i) * d;
      double sum_g = 0.0, sum_gx = 0.0;
      for (int j = 0; j < d; ++j) {
        const float dy = self.grad[base + j];
        if (gg) (*gg)[j] += dy * (*xhat)[base + j];
        if (gb) (*gb)[j] += dy;
        const float g = dy * gn->value[j];
        sum_g += g;
        sum_gx += g * (*xhat)[base + j];
      }
      if (!gx) continue;
      const float mean_g = static_cast<float>(sum_g / d);
      const float mean_gx = static_cast<float>(sum_gx / d);
      for (int j = 0; j < d; ++j) {
        const float g = self.grad[base + j] * gn->value[j];
        (*gx)[base + j] += (*inv_std)[i] * (g - mean_g - (*xhat)[base + j] * mean_gx);
      }
    }
  });
}

Tensor reshape(const Tensor& x, int rows, int cols) {
  require(static_cast<std::size_t>(rows) * cols == x.numel(), "reshape: element count");
  std::vector<float> out(x.values().begin(), x.values().end());
  auto xn = x.node();
  return result(rows, cols, std::move(out), {&x}, [xn](Node& self) {
    if (auto* g = grad_of(xn))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
  });
}

Tensor slice_rows(const Tensor& x, int start, int count) {
  require(start >= 0 && count >= 0 && start + count <= x.rows(), "slice_rows: out of range");
  const int d = x.cols();
  const auto xv = x.values();
  std::vector<float> out(xv.begin() + static_cast<std::ptrdiff_t>(start) * d,
                         xv.begin() + static_cast<std::ptrdiff_t>(start + count) * d);
  auto xn = x.node();
  return result(count, d, std::move(out), {&x}, [xn, start, d](Node& self) {
    if (auto* g = grad_of(xn))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[static_cast<std::size_t>(start) * d + i] += self.grad[i];
  });
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
  const int d = table.cols();
  const int t = static_cast<int>(ids.size());
  std::vector<float> out(static_cast<std::size_t>(t) * d);
  const auto tv = table.values();
  for (int i = 0; i < t; ++i) {
    require(ids[i] >= 0 && ids[i] < table.rows(), "embedding: id out of range");
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(ids[i]) * d, d,
                out.begin() + static_cast<std::ptrdiff_t>(i) * d);
  }
  auto tn = table.node();
  std::vector<int> saved(ids.begin(), ids.end());
  return result(t, d, std::move(out), {&table}, [tn, saved = std::move(saved), d](Node& self) {
    auto* g = grad_of(tn);
    if (!g) return;
    for (std::size_t i = 0; i < saved.size(); ++i)
      for (int j = 0; j < d; ++j)
        (*g)[static_cast<std::size_t>(saved[i]) * d + j] += self.grad[i * d + j];
  });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads, bool causal) {
  const int m = q.rows(), n = k.rows(), d = q.cols();
  require(k.cols() == d && v.cols() == d && v.rows() == n, "attention: shape mismatch");
  require(heads > 0 && d % heads == 0, "attention: width not divisible by heads");
  const int dh = d / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

  // Per-head contiguous copies: qh[h][m,dh] etc.
  auto split = [heads, dh, d](std::span<const float> src, int rows) {
    std::vector<float> out(static_cast<std::size_t>(heads) * rows * dh);
    for (int h = 0; h < heads; ++h)
      for (int r = 0; r < rows; ++r)
        std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(r) * d + h * dh, dh,
                    out.begin() + (static_cast<std::ptrdiff_t>(h) * rows + r) * dh);
    return out;
  };
  auto qh = std::make_shared<std::vector<float>>(split(q.values(), m));
  auto kh = std::make_shared<std::vector<float>>(split(k.values(), n));
  auto vh = std::make_shared<std::vector<float>>(split(v.values(), n));
  auto probs = std::make_shared<std::vector<float>>(static_cast<std::size_t>(heads) * m * n);
  std::vector<float> out(static_cast<std::size_t>(m) * d);
  std::vector<float> oh(static_cast<std::size_t>(m) * dh);

  for (int h = 0; h < heads; ++h) {
    const std::size_t qo = static_cast<std::size_t>(h) * m * dh;
    const std::size_t ko = static_cast<std::size_t>(h) * n * dh;
    std::span<float> p(probs->data() + static_cast<std::size_t>(h) * m * n, static_cast<std::size_t>(m) * n);
    kernels::gemm_nt(std::span<const float>(*qh).subspan(qo, std::size_t(m) * dh),
                     std::span<const float>(*kh).subspan(ko, std::size_t(n) * dh), p, m, dh, n);
    for (int i = 0; i < m; ++i) {
      float* row = p.data() + static_cast<std::size_t>(i) * n;
      const int visible = causal ? std::min(n, i + 1) : n;
      float mx = -std::numeric_limits<float>::infinity();
      for (int j = 0; j < visible; ++j) {
        row[j] *= scale;
        mx = std::max(mx, row[j]);
      }
      float sum = 0.0f;
      for (int j = 0; j < visible; ++j) {
        row[j] = std::exp(row[j] - mx);
        sum += row[j];
      }
      for (int j = 0; j < visible; ++j) row[j] /= sum;
      for (int j = visible; j < n; ++j) row[j] = 0.0f;
    }
    kernels::gemm_nn(p, std::span<const float>(*vh).subspan(ko, std::size_t(n) * dh), oh, m, n, dh);
    for (int i = 0; i < m; ++i)
      std::copy_n(oh.begin() + static_cast<std::ptrdiff_t>(i) * dh, dh,
                  out.begin() + static_cast<std::ptrdiff_t>(i) * d + h * dh);
  }

  auto qn = q.node(), kn = k.node(), vn = v.node();
  return result(m, d, std::move(out), {&q, &k, &v},
                [qn, kn, vn, qh, kh, vh, probs, m, n, d, dh, heads, scale](Node& self) {
    auto* gq = grad_of(qn);
    auto* gk = grad_of(kn);
    auto* gv = grad_of(vn);
    std::vector<float> doh(static_cast<std::size_t>(m) * dh);
    std::vector<float> dp(static_cast<std::size_t>(m) * n);
    std::vector<float> tmp_q(static_cast<std::size_t>(m) * dh);
    std::vector<float> tmp_kv(static_cast<std::size_t>(n) * dh);
    for (int h = 0; h < heads; ++h) {
      for (int i = 0; i < m; ++i)
        std::copy_n(self.grad.begin() + static_cast<std::ptrdiff_t>(i) * d + h * dh, dh,
                    doh.begin() + static_cast<std::ptrdiff_t>(i) * dh);
      std::span<const float> p(probs->data() + static_cast<std::size_t>(h) * m * n, std::size_t(m) * n);
      std::span<const float> qs = std::span<const float>(*qh).subspan(std::size_t(h) * m * dh, std::size_t(m) * dh);
      std::span<const float> ks = std::span<const float>(*kh).subspan(std::size_t(h) * n * dh, std::size_t(n) * dh);
      std::span<const float> vs = std::span<const float>(*vh).subspan(std::size_t(h) * n * dh, std::size_t(n) * dh);
      if (gv) {
        kernels::gemm_tn(p, doh, tmp_kv, n, m, dh);
        for (int j = 0; j < n; ++j)
          for (int c = 0; c < dh; ++c)
            (*gv)[static_cast<std::size_t>(j) * d + h * dh + c] += tmp_kv[static_cast<std::size_t>(j) * dh + c];
      }
      if (!gq && !gk) continue;
      kernels::gemm_nt(doh, vs, dp, m, dh, n);
      // dS = P * (dP - rowsum(dP * P)), then fold in the 1/sqrt(dh) scale.
      for (int i = 0; i < m; ++i) {
        float* dr = dp.data() + static_cast<std::size_t>(i) * n;
        const float* pr = p.data() + static_cast<std::size_t>(i) * n;
        float dot = 0.0f;
        for (int j = 0; j < n; ++j) dot += dr[j] * pr[j];
        for (int j = 0; j < n; ++j) dr[j] = pr[j] * (dr[j] - dot) * scale;
      }
      if (gq) {
        kernels::gemm_nn(dp, ks, tmp_q, m, n, dh);
        for (int i = 0; i < m; ++i)
          for (int c = 0; c < dh; ++c)
            (*gq)[static_cast<std::size_t>(i) * d + h * dh + c] += tmp_q[static_cast<std::size_t>(i) * dh + c];
      }
      if (gk) {
        kernels::gemm_tn(dp, qs, tmp_kv, n, m, dh);
        for (int j = 0; j < n; ++j)
          for (int c = 0; c < dh; ++c)
            (*gk)[static_cast<std::size_t>(j) * d + h * dh + c] += tmp_kv[static_cast<std::size_t>(j) * dh + c];
      }
    }
  });
}

Tensor cross_entropy_sum(const Tensor& logits, std::span<const int> targets, float scale) {
  const int t = logits.rows(), vocab = logits.cols();
  require(static_cast<int>(targets.size()) == t, "cross_entropy: one target per row");
  const auto lv = logits.values();
  auto probs = std::make_shared<std::vector<float>>(lv.size());
  double total = 0.0;
  for (int i = 0; i < t; ++i) {
    if (targets[i] < 0) continue;
    require(targets[i] < vocab, "cross_entropy: target out of range");
    const float* row = lv.data() + static_cast<std::size_t>(i) * vocab;
    float* pr = probs->data() + static_cast<std::size_t>(i) * vocab;
    const float mx = *std::max_element(row, row + vocab);
    double sum = 0.0;
    for (int j = 0; j < vocab; ++j) {
      pr[j] = std::exp(row[j] - mx);
      sum += pr[j];
    }
    const float inv = static_cast<float>(1.0 / sum);
    for (int j = 0; j < vocab; ++j) pr[j] *= inv;
    total += (std::log(sum) + mx) - row[targets[i]];
  }
  auto ln = logits.node();
  std::vector<int> saved(targets.begin(), targets.end());
  return result(1, 1, {static_cast<float>(scale * total)}, {&logits},
                [ln, probs, saved = std::move(saved), vocab, scale](Node& self) {
    auto* g = grad_of(ln);
    if (!g) return;
    const float up = self.grad[0] * scale;
    for (std::size_t i = 0; i < saved.size(); ++i) {
      if (saved[i] < 0) continue;
      const std::size_t base = i * vocab;
      for (int j = 0; j < vocab; ++j) (*g)[base + j] += up * (*probs)[base + j];
      (*g)[base + saved[i]] -= up;
    }
  });
}

Tensor round_half(const Tensor& x) {
  std::vector<float> out(x.values().begin(), x.values().end());
  for (float& v : out) v = kernels::round_to_half(v);
  auto xn = x.node();
  return result(x.rows(), x.cols(), std::move(out), {&x}, [xn](Node& self) {
    if (auto* g = grad_of(xn))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += kernels::round_to_half(self.grad[i]);
  });
}

}  // namespace csw::nn

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

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace csw::nn {

namespace detail {

struct Node {
  int rows = 0;
  int cols = 0;
  std::vector<float> value;
  std::vector<float> grad;  ///< empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  /// Propagates this node's grad into its inputs' grads.
  std::function<void(Node&)> backward_fn;

  std::vector<float>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0f);
    return grad;
  }
};

}  // namespace detail

/// A 2-D float matrix (row-major) that may record the operations applied to
/// it for reverse-mode differentiation. Copies share storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(int rows, int cols);
  static Tensor from_values(int rows, int cols, std::vector<float> values);
  /// Leaf that accumulates gradients.
  static Tensor parameter(int rows, int cols, std::vector<float> values);

  bool defined() const { return node_ != nullptr; }
  int rows() const { return node_->rows; }
  int cols() const { return node_->cols; }
  std::size_t numel() const { return node_->value.size(); }

  std::span<float> values() { return node_->value; }
  std::span<const float> values() const { return node_->value; }
  float item() const { return node_->value.at(0); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  /// Zero-filled on first access.
  std::span<float> grad() { return node_->ensure_grad(); }
  std::span<const float> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Whether new operations record a graph (thread-local).
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Back-propagates from a 1x1 tensor, seeding d(loss) = `seed` (the loss
/// scale in mixed-precision training). Gradients accumulate into leaves.
void backward(const Tensor& loss, float seed = 1.0f);

}  // namespace csw::nn

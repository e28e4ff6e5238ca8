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

#include "cswhisper/nn/tensor.hpp"

#include <stdexcept>
#include <unordered_set>

namespace csw::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

Tensor Tensor::zeros(int rows, int cols) {
  return from_values(rows, cols, std::vector<float>(static_cast<std::size_t>(rows) * cols, 0.0f));
}

Tensor Tensor::from_values(int rows, int cols, std::vector<float> values) {
  if (values.size() != static_cast<std::size_t>(rows) * cols)
    throw std::invalid_argument("tensor shape does not match value count");
  auto node = std::make_shared<detail::Node>();
  node->rows = rows;
  node->cols = cols;
  node->value = std::move(values);
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(int rows, int cols, std::vector<float> values) {
  Tensor t = from_values(rows, cols, std::move(values));
  t.set_requires_grad(true);
  return t;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const Tensor& loss, float seed) {
  if (loss.numel() != 1) throw std::invalid_argument("backward() needs a scalar loss");
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->ensure_grad()[0] += seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

}  // namespace csw::nn

// soundsieve/tensor.hpp
//
// Dense n-dimensional array participating in reverse-mode differentiation.
// Everything is templated on the scalar type: the toolkit trains in float32,
// while the test suite instantiates the same graph at float64 for
// finite-difference checks.

// Copyright 2026 SoundSieve Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SOUNDSIEVE_TENSOR_HPP_
#define SOUNDSIEVE_TENSOR_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "soundsieve/common.hpp"

namespace soundsieve {

inline std::size_t numel_of(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename S>
class Tensor;

template <typename S>
using TensorPtr = std::shared_ptr<Tensor<S>>;

// A graph node. Ops run eagerly and record a closure that scatters the
// node's gradient into its parents. The closure receives the node by
// reference rather than capturing it, which keeps the graph cycle-free.
template <typename S>
class Tensor : public std::enable_shared_from_this<Tensor<S>> {
 public:
  std::vector<std::size_t> shape;
  std::vector<S> value;
  std::vector<S> grad;
  bool requires_grad = false;

  std::vector<TensorPtr<S>> parents;
  std::function<void(Tensor<S>&)> backward_fn;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape_in, bool requires_grad_in)
      : shape(std::move(shape_in)),
        value(numel_of(shape), S(0)),
        requires_grad(requires_grad_in) {}

  std::size_t numel() const { return value.size(); }

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), S(0));
  }

  void zero_grad() { grad.assign(value.size(), S(0)); }
};

template <typename S>
TensorPtr<S> make_tensor(std::vector<std::size_t> shape,
                         bool requires_grad = false) {
  return std::make_shared<Tensor<S>>(std::move(shape), requires_grad);
}

template <typename S>
TensorPtr<S> make_tensor(std::vector<std::size_t> shape, std::vector<S> values,
                         bool requires_grad = false) {
  if (numel_of(shape) != values.size()) {
    throw ShapeMismatch("value count does not match shape " + shape_str(shape));
  }
  auto t = std::make_shared<Tensor<S>>(std::move(shape), requires_grad);
  t->value = std::move(values);
  return t;
}

// Reverse-mode sweep from a scalar root: topological order via iterative DFS
// over parent edges, then each node's closure runs exactly once, children
// before parents.
template <typename S>
void backward(const TensorPtr<S>& root) {
  if (root->numel() != 1) {
    throw ShapeMismatch("backward root must be scalar, got " +
                        shape_str(root->shape));
  }
  std::vector<Tensor<S>*> order;
  std::unordered_set<Tensor<S>*> seen;
  std::vector<std::pair<Tensor<S>*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next_parent] = stack.back();
    if (next_parent < node->parents.size()) {
      Tensor<S>* parent = node->parents[next_parent].get();
      ++next_parent;
      if (seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] = S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Tensor<S>* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

}  // namespace soundsieve

#endif  // SOUNDSIEVE_TENSOR_HPP_

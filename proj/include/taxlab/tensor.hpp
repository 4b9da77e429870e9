/*
 * Copyright (c) 2026 The taxlab Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "taxlab/util.hpp"

namespace taxlab::num {

/// Dense row-major tensor node with an optional recorded backward op.
/// Values are stored in T (float in production, double in check harnesses);
/// reductions inside ops accumulate in double regardless of T.
template <typename T>
struct TensorNode {
  std::vector<std::int64_t> shape;
  std::vector<T> values;
  std::vector<T> grad;  // empty until the backward pass reaches this node
  bool requires_grad{false};
  std::string name;  // parameters carry names for optimizer diagnostics

  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_op;
  bool backward_ran{false};  // set on the loss root; guards double backward

  std::int64_t size() const {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }

  void ensure_grad() {
    if (grad.empty()) grad.assign(values.size(), T{0});
  }

  /// True when the backward pass has to deposit or route gradients here.
  bool tracked() const { return requires_grad || static_cast<bool>(backward_op); }
};

/// Disables graph recording for pure-inference forward passes.
inline bool& grad_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}

struct NoGradGuard {
  NoGradGuard() : prev_(grad_enabled_flag()) { grad_enabled_flag() = false; }
  ~NoGradGuard() { grad_enabled_flag() = prev_; }

 private:
  bool prev_;
};

template <typename T>
class Tensor {
 public:
  using Node = TensorNode<T>;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Tensor zeros(std::vector<std::int64_t> shape) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->values.assign(static_cast<std::size_t>(n->size()), T{0});
    return Tensor(std::move(n));
  }

  static Tensor from(std::vector<std::int64_t> shape, std::vector<T> values) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    if (static_cast<std::int64_t>(values.size()) != n->size()) {
      throw std::invalid_argument("Tensor::from: " + std::to_string(values.size()) +
                                  " values for shape " + shape_str(n->shape));
    }
    n->values = std::move(values);
    return Tensor(std::move(n));
  }

  static Tensor scalar(T v) { return from({1}, {v}); }

  /// Named trainable leaf.
  static Tensor parameter(std::string name, std::vector<std::int64_t> shape,
                          std::vector<T> values) {
    Tensor t = from(std::move(shape), std::move(values));
    t.node_->requires_grad = true;
    t.node_->name = std::move(name);
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::int64_t>& shape() const { return node_->shape; }
  std::int64_t size() const { return node_->size(); }
  std::int64_t dim(std::size_t i) const { return node_->shape.at(i); }

  std::vector<T>& values() { return node_->values; }
  const std::vector<T>& values() const { return node_->values; }
  std::vector<T>& grad() { return node_->grad; }
  const std::vector<T>& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool b) { node_->requires_grad = b; }
  const std::string& name() const { return node_->name; }

  void zero_grad() { node_->grad.clear(); }

  T item() const {
    if (size() != 1) {
      throw std::invalid_argument("Tensor::item: tensor of shape " +
                                  shape_str(node_->shape) + " is not a scalar");
    }
    return node_->values[0];
  }

  std::shared_ptr<Node> node() const { return node_; }

  std::uint64_t checksum() const {
    std::uint64_t h = fnv1a(node_->values.data(), node_->values.size() * sizeof(T));
    return fnv1a(node_->shape.data(), node_->shape.size() * sizeof(std::int64_t), h);
  }

 private:
  std::shared_ptr<Node> node_;
};

/// Reverse-mode sweep from a scalar loss. Every tracked node reachable from
/// the root receives its exact gradient; frozen leaves (requires_grad false,
/// no parents) are skipped entirely.
template <typename T>
inline void backward(const Tensor<T>& loss) {
  auto root = loss.node();
  if (!root) throw std::invalid_argument("backward: undefined tensor");
  if (root->size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(root->shape));
  }
  if (root->backward_ran) {
    throw std::logic_error("backward: already ran on this graph; rebuild the graph "
                           "or reset gradients before calling again");
  }
  root->backward_ran = true;

  // Iterative post-order DFS; recursion would overflow on long graphs.
  std::vector<TensorNode<T>*> topo;
  std::unordered_set<TensorNode<T>*> visited;
  struct Frame {
    TensorNode<T>* node;
    std::size_t child;
  };
  std::vector<Frame> stack;
  stack.push_back({root.get(), 0});
  visited.insert(root.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.child < f.node->parents.size()) {
      TensorNode<T>* p = f.node->parents[f.child++].get();
      if (p->backward_op && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      topo.push_back(f.node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] = T{1};
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    TensorNode<T>* n = *it;
    if (n->backward_op && !n->grad.empty()) n->backward_op(*n);
  }
}

}  // namespace taxlab::num

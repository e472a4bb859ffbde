// Copyright 2026 The GeoFuse Authors. All Rights Reserved.
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

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

namespace geofuse::ad {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One value in the computation graph. Leaves (parameters, constants) have no
// parents; op nodes carry a backward closure that pushes `grad` into the
// parents that require it.
template <typename T>
struct Node {
  Mat<T> value;
  Mat<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Mat<T>& grad_buffer() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols()) {
      grad = Mat<T>::Zero(value.rows(), value.cols());
    }
    return grad;
  }
  bool parent_needs_grad(std::size_t i) const { return parents[i]->requires_grad; }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Mat<T> value, bool requires_grad = false) : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Mat<T>& value() const { return node_->value; }
  Mat<T>& mutable_value() { return node_->value; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  T item() const { return node_->value(0, 0); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  bool has_grad() const {
    return node_->grad.rows() == node_->value.rows() && node_->grad.cols() == node_->value.cols() &&
           node_->grad.size() > 0;
  }
  const Mat<T>& grad() const { return node_->grad; }
  Mat<T>& grad_buffer() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad.resize(0, 0); }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Creates an op node. The backward closure is dropped (and parents released)
// when no parent requires a gradient, so frozen sub-graphs cost nothing.
template <typename T>
Var<T> make_node(Mat<T> value, std::vector<Var<T>> parents, std::function<void(Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  bool needs = false;
  for (const auto& p : parents) needs = needs || (p.defined() && p.requires_grad());
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const auto& p : parents) {
      node->parents.push_back(p.defined() ? p.node() : std::make_shared<Node<T>>());
    }
    node->backward = std::move(backward);
  }
  return Var<T>(std::move(node));
}

template <typename T>
Var<T> constant(Mat<T> value) {
  return Var<T>(std::move(value), false);
}

template <typename T>
Var<T> detach(const Var<T>& v) {
  return Var<T>(v.value(), false);
}

// Reverse sweep from `root`, seeded with ones. Gradients accumulate into
// every reachable node that requires them (leaf parameters keep theirs).
template <typename T>
void backward(const Var<T>& root) {
  if (!root.defined() || !root.requires_grad()) return;
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node<T>* p = node->parents[idx++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->grad_buffer().setOnes();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward && n->grad.size() > 0) n->backward(*n);
  }
}

}  // namespace geofuse::ad

/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <unordered_set>
#include <utility>

#include "cwcc/common.hpp"

namespace cwcc {

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // allocated on demand, always data.size() once present
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }

  void accumulate(std::span<const T> g) {
    ensure_grad();
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
  }
};

}  // namespace detail

/// Dense row-major n-d array with reverse-mode autodiff. Value-semantic
/// handle to a shared node; nodes are immutable after construction except
/// for gradient accumulation.
template <typename T>
class Tensor {
 public:
  using NodePtr = std::shared_ptr<detail::Node<T>>;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return filled(std::move(shape), T(0), requires_grad);
  }

  static Tensor filled(Shape shape, T value, bool requires_grad = false) {
    check_shape(shape);
    auto n = std::make_shared<detail::Node<T>>();
    n->data.assign(static_cast<std::size_t>(numel(shape)), value);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false) {
    check_shape(shape);
    if (static_cast<std::int64_t>(data.size()) != numel(shape)) {
      fail("tensor: data length " + std::to_string(data.size()) + " does not match shape " + shape_str(shape));
    }
    auto n = std::make_shared<detail::Node<T>>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor scalar(T value, bool requires_grad = false) {
    return from_data({1}, {value}, requires_grad);
  }

  /// Internal: result node of an op. `backward_fn` receives the finished node
  /// and must accumulate into its parents' grads.
  static Tensor result(Shape shape, std::vector<T> data, std::vector<Tensor> parents,
                       std::function<void(detail::Node<T>&)> backward_fn) {
    auto t = from_data(std::move(shape), std::move(data), false);
    bool needs = false;
    for (const auto& p : parents) {
      t.node_->parents.push_back(p.node_);
      needs = needs || p.requires_grad();
    }
    t.node_->requires_grad = needs;
    if (needs) t.node_->backward_fn = std::move(backward_fn);
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::int64_t size() const { return node_->size(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  std::span<const T> data() const { return {node_->data.data(), node_->data.size()}; }
  /// Mutable view; reserved for leaf initialization and optimizer updates.
  std::span<T> mutable_data() { return {node_->data.data(), node_->data.size()}; }

  bool has_grad() const { return node_ && node_->grad.size() == node_->data.size(); }
  std::span<const T> grad() const {
    if (!has_grad()) fail("tensor: gradient not populated; run backward() first");
    return {node_->grad.data(), node_->grad.size()};
  }

  void zero_grad() {
    if (node_ && node_->requires_grad) {
      node_->ensure_grad();
      std::fill(node_->grad.begin(), node_->grad.end(), T(0));
    }
  }

  T item() const {
    if (size() != 1) fail("tensor: item() on non-scalar of shape " + shape_str(shape()));
    return node_->data[0];
  }

  /// Reverse-mode pass from a scalar root. Gradients accumulate; callers
  /// must zero_grad() between optimization steps.
  void backward() const {
    if (!node_) fail("tensor: backward() on empty tensor");
    if (size() != 1) fail("tensor: backward() root must be scalar, got shape " + shape_str(shape()));
    // Topological order over the recorded graph.
    std::vector<detail::Node<T>*> order;
    std::unordered_set<const detail::Node<T>*> seen;
    std::vector<std::pair<detail::Node<T>*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        detail::Node<T>* p = n->parents[next++].get();
        if (seen.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
    // Allocate every reachable gradient before any backward_fn runs; the
    // functions accumulate straight into their parents' buffers.
    for (detail::Node<T>* n : order) {
      if (n->requires_grad) n->ensure_grad();
    }
    node_->ensure_grad();
    node_->grad[0] += T(1);
    // order is child-after-parent; walk it reversed.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      detail::Node<T>* n = *it;
      if (n->backward_fn) n->backward_fn(*n);
    }
  }

  /// Detached copy: same values, fresh leaf.
  Tensor detach(bool requires_grad = false) const {
    return from_data(shape(), {node_->data.begin(), node_->data.end()}, requires_grad);
  }

  NodePtr node() const { return node_; }

 private:
  explicit Tensor(NodePtr n) : node_(std::move(n)) {}

  static void check_shape(const Shape& shape) {
    if (shape.empty()) fail("tensor: empty shape");
    for (int d : shape) {
      if (d <= 0) fail("tensor: non-positive extent in shape " + shape_str(shape));
    }
  }

  NodePtr node_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <typename T>
inline bool all_finite(const Tensor<T>& t) {
  for (T v : t.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace cwcc

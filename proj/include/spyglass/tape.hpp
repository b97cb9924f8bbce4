/*
 * Copyright 2026 The Spyglass Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <deque>
#include <functional>
#include <string>
#include <utility>

#include "spyglass/tensor.hpp"

namespace spyglass {

template <typename Scalar>
class Tape;

/// Handle to a value recorded on a tape.
template <typename Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  Index id = -1;

  const Tensor<Scalar>& value() const { return tape->value(*this); }
  const Shape& shape() const { return value().shape(); }
  Index dim(Index axis) const { return value().dim(axis); }
};

/**
 * Reverse-mode recording of differentiable operations.
 *
 * Nodes are appended in execution order, so the record is topologically
 * sorted by construction. Parameters enter through leaf(); their gradients
 * are accumulated into the source tensor's grad buffer when backward() runs.
 * A tape is single-use: backward() consumes it.
 */
template <typename Scalar>
class Tape {
 public:
  using Data = Vector<Scalar>;
  /// Receives the gradient of the node's output; accumulates into inputs.
  using BackwardFn = std::function<void(Tape&, const Data&)>;

  /// With `track_gradients` false no backward closures are kept (inference mode).
  explicit Tape(bool track_gradients = true) : track_gradients_(track_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Records a parameter. Gradients flow back into `param` iff it requires grad.
  Var<Scalar> leaf(Tensor<Scalar>& param) {
    Node node;
    node.value = Tensor<Scalar>(param.shape(), param.data());
    node.needs_grad = track_gradients_ && param.requires_grad();
    node.source = node.needs_grad ? &param : nullptr;
    return push(std::move(node));
  }

  Var<Scalar> constant(Tensor<Scalar> value) {
    Node node;
    node.value = std::move(value);
    node.value.clear_grad();
    return push(std::move(node));
  }

  /// Appends the result of an operation. `fn` is kept only when some input needs a gradient.
  Var<Scalar> record(Tensor<Scalar> value, bool needs_grad, BackwardFn fn) {
    check_open();
    Node node;
    node.value = std::move(value);
    node.needs_grad = needs_grad;
    if (needs_grad) node.backward = std::move(fn);
    return push(std::move(node));
  }

  const Tensor<Scalar>& value(Var<Scalar> v) const { return node(v).value; }
  bool needs_grad(Var<Scalar> v) const { return node(v).needs_grad; }

  /// Adds `g` into the gradient of `v`. No-op for nodes that do not need one.
  template <typename Derived>
  void accumulate(Var<Scalar> v, const Eigen::ArrayBase<Derived>& g) {
    Node& n = node(v);
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Mutable gradient buffer for `v`, zero-initialised on first use.
  Data& grad_buffer(Var<Scalar> v) {
    Node& n = node(v);
    if (n.grad.size() == 0) n.grad = Data::Zero(n.value.size());
    return n.grad;
  }

  void backward(Var<Scalar> loss) {
    check_open();
    const Node& root = node(loss);
    if (root.value.size() != 1) {
      throw ShapeError("backward needs a scalar loss, got shape " + shape_string(root.value.shape()));
    }
    consumed_ = true;
    if (!root.needs_grad) return;
    node(loss).grad = Data::Ones(1);
    for (Index id = static_cast<Index>(nodes_.size()) - 1; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.needs_grad || n.grad.size() == 0) continue;
      if (n.backward) {
        n.backward(*this, n.grad);
      } else if (n.source != nullptr) {
        n.source->grad() += n.grad;
      }
      // Intermediate gradients are dead once propagated.
      n.grad.resize(0);
    }
  }

  bool consumed() const { return consumed_; }
  Index size() const { return static_cast<Index>(nodes_.size()); }

 private:
  struct Node {
    Tensor<Scalar> value;
    Tensor<Scalar>* source = nullptr;
    bool needs_grad = false;
    Data grad;
    BackwardFn backward;
  };

  void check_open() const {
    if (consumed_) throw Error("tape already consumed by backward(); record a new forward pass");
  }

  Var<Scalar> push(Node node) {
    nodes_.push_back(std::move(node));
    return Var<Scalar>{this, static_cast<Index>(nodes_.size()) - 1};
  }

  Node& node(Var<Scalar> v) {
    if (v.tape != this || v.id < 0 || v.id >= size()) throw Error("variable does not belong to this tape");
    return nodes_[static_cast<std::size_t>(v.id)];
  }
  const Node& node(Var<Scalar> v) const {
    if (v.tape != this || v.id < 0 || v.id >= size()) throw Error("variable does not belong to this tape");
    return nodes_[static_cast<std::size_t>(v.id)];
  }

  // deque keeps references to earlier nodes valid while new ones are appended.
  std::deque<Node> nodes_;
  bool track_gradients_ = true;
  bool consumed_ = false;
};

}  // namespace spyglass

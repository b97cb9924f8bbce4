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

#include <Eigen/Core>

#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "spyglass/error.hpp"

namespace spyglass {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using Vector = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

/**
 * Dense row-major tensor with an optional gradient buffer.
 *
 * Value semantics throughout: copies are deep. The gradient buffer is
 * allocated the first time it is touched and always matches the shape of
 * the data.
 */
template <typename Scalar>
class Tensor {
 public:
  using Data = Vector<Scalar>;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_ = Data::Zero(shape_size(shape_));
  }

  Tensor(Shape shape, Data data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != shape_size(shape_)) {
      throw ShapeError("tensor data has " + std::to_string(data_.size()) +
                       " values but shape " + shape_string(shape_) + " needs " +
                       std::to_string(shape_size(shape_)));
    }
  }

  static Tensor filled(Shape shape, Scalar value) {
    Tensor t(std::move(shape));
    t.data_.setConstant(value);
    return t;
  }

  static Tensor scalar(Scalar value) { return filled({1}, value); }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return data_.size(); }

  Data& data() { return data_; }
  const Data& data() const { return data_; }
  Scalar* raw() { return data_.data(); }
  const Scalar* raw() const { return data_.data(); }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  /// Value of a single-element tensor.
  Scalar item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
    return data_[0];
  }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool flag) { requires_grad_ = flag; }

  bool has_grad() const { return grad_.size() == data_.size() && data_.size() > 0; }

  Data& grad() {
    if (!has_grad()) grad_ = Data::Zero(data_.size());
    return grad_;
  }
  const Data& grad() const {
    if (!has_grad()) throw Error("tensor has no gradient");
    return grad_;
  }
  void zero_grad() {
    if (has_grad()) grad_.setZero();
  }
  void clear_grad() { grad_.resize(0); }

  bool all_finite() const { return data_.allFinite(); }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape_, data_.template cast<Other>());
    out.set_requires_grad(requires_grad_);
    return out;
  }

  Tensor reshaped(Shape shape) const {
    Tensor out(std::move(shape), data_);
    out.set_requires_grad(requires_grad_);
    return out;
  }

 private:
  static void check_shape(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (shape[i] <= 0) {
        throw ShapeError("dimension " + std::to_string(i) + " of shape " + shape_string(shape) +
                         " is not positive");
      }
    }
  }

  Shape shape_;
  Data data_;
  Data grad_;
  bool requires_grad_ = false;
};

}  // namespace spyglass

// Copyright 2026 The fragmix authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fragmix/errors.hpp"

namespace fragmix {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << "]";
  return os.str();
}

/// Dense row-major n-d array of scalars, shared-handle semantics.
///
/// A Tensor is a cheap-to-copy handle onto one node of the computation
/// graph. Values are contiguous; the gradient buffer has the same shape and
/// is allocated lazily on first accumulation. There are no strided views:
/// every op materializes its output.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<T> values) {
    if (shape_numel(shape) != values.size())
      throw DimensionError("tensor: shape " + shape_str(shape) + " wants " +
                           std::to_string(shape_numel(shape)) + " values, got " +
                           std::to_string(values.size()));
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(values);
    return t;
  }

  static Tensor full(Shape shape, T fill) {
    return from(std::move(shape), std::vector<T>(shape_numel(shape), fill));
  }

  static Tensor zeros(Shape shape) { return full(std::move(shape), T(0)); }
  static Tensor ones(Shape shape) { return full(std::move(shape), T(1)); }
  static Tensor scalar(T v) { return from({1}, {v}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape[i]; }
  std::size_t numel() const { return node_->value.size(); }

  std::span<T> data() { return {node_->value.data(), node_->value.size()}; }
  std::span<const T> data() const {
    return {node_->value.data(), node_->value.size()};
  }

  T item() const {
    if (numel() != 1)
      throw DimensionError("item: tensor " + shape_str(shape()) + " is not scalar");
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool b) { node_->requires_grad = b; }

  bool has_grad() const { return !node_->grad.empty(); }

  /// Gradient buffer, allocating zeros on first use.
  std::span<T> grad() {
    if (node_->grad.empty()) node_->grad.assign(node_->value.size(), T(0));
    return {node_->grad.data(), node_->grad.size()};
  }

  std::span<const T> grad_view() const {
    return {node_->grad.data(), node_->grad.size()};
  }

  void zero_grad() {
    if (!node_->grad.empty()) node_->grad.assign(node_->value.size(), T(0));
  }

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // empty until touched
    bool requires_grad = false;
  };

  std::shared_ptr<Node> node_;
};

/// Reverse-mode tape. Forward ops append one backward rule each; backward()
/// replays them once, in reverse recorded order. Gradients of shared inputs
/// accumulate additively because every rule adds into its inputs' buffers.
template <typename T>
class Tape {
 public:
  bool recording() const { return recording_; }
  void set_recording(bool b) { recording_ = b; }

  void record(std::function<void()> backward_rule) {
    steps_.push_back(std::move(backward_rule));
  }

  std::size_t size() const { return steps_.size(); }

  void backward(Tensor<T> loss) {
    if (loss.numel() != 1)
      throw DimensionError("backward: loss " + shape_str(loss.shape()) +
                           " is not scalar");
    loss.grad()[0] += T(1);
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  }

  void clear() { steps_.clear(); }

 private:
  std::vector<std::function<void()>> steps_;
  bool recording_ = true;
};

}  // namespace fragmix

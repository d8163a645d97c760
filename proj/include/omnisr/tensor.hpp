// Copyright 2026 The OmniSR Toolkit Authors.
//
//    Licensed under the Apache License, Version 2.0 (the "License");
//    you may not use this file except in compliance with the License.
//    You may obtain a copy of the License at
//
//         http://www.apache.org/licenses/LICENSE-2.0
//
//    Unless required by applicable law or agreed to in writing, software
//    distributed under the License is distributed on an "AS IS" BASIS,
//    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//    See the License for the specific language governing permissions and
//    limitations under the License.

#pragma once

// Dense row-major tensor with tape-based reverse-mode differentiation.
//
// Every kernel is templated on the scalar type. Training and inference run
// on Tensor<float>; the gradient-check harness instantiates the same code on
// Tensor<double> as its 64-bit shadow path.
//
// A Tape records one backward closure per differentiable op while it is the
// active tape of the calling thread (see TapeScope). Ops executed with no
// active tape, or on inputs that do not require gradients, record nothing
// and are pure functions of their inputs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "omnisr/errors.hpp"

namespace omnisr {

inline std::int64_t numel_of(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1},
                         std::multiplies<>());
}

template <typename Scalar>
struct TensorNode {
  Shape shape;
  std::vector<Scalar> value;
  std::vector<Scalar> grad;  // empty until the first gradient contribution
  bool requires_grad = false;

  std::vector<Scalar>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), Scalar(0));
    return grad;
  }
};

template <typename Scalar>
class Tensor {
  static_assert(std::is_floating_point_v<Scalar>,
                "Tensor scalar must be a floating point type");

 public:
  using Node = TensorNode<Scalar>;

  Tensor() = default;

  explicit Tensor(Shape shape, Scalar fill = Scalar(0))
      : node_(std::make_shared<Node>()) {
    validate(shape);
    node_->value.assign(static_cast<std::size_t>(numel_of(shape)), fill);
    node_->shape = std::move(shape);
  }

  Tensor(Shape shape, std::vector<Scalar> values)
      : node_(std::make_shared<Node>()) {
    validate(shape);
    if (numel_of(shape) != static_cast<std::int64_t>(values.size())) {
      throw ShapeError("tensor data length " + std::to_string(values.size()) +
                       " does not match shape " + to_string(shape));
    }
    node_->shape = std::move(shape);
    node_->value = std::move(values);
  }

  static Tensor scalar(Scalar v) { return Tensor(Shape{1}, std::vector<Scalar>{v}); }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  std::int64_t numel() const { return static_cast<std::int64_t>(node_->value.size()); }

  /// Extent of axis `axis`; negative values count from the back.
  std::int64_t dim(int axis) const {
    const int r = rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) {
      throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                       to_string(shape()));
    }
    return node_->shape[static_cast<std::size_t>(axis)];
  }

  std::span<Scalar> values() { return node_->value; }
  std::span<const Scalar> values() const { return node_->value; }
  Scalar* data() { return node_->value.data(); }
  const Scalar* data() const { return node_->value.data(); }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const Scalar> grad() const { return node_->grad; }
  std::span<Scalar> grad() { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on = true) {
    node_->requires_grad = on;
    return *this;
  }

  /// Value of a single-element tensor.
  Scalar item() const {
    if (numel() != 1) {
      throw UsageError("item() on tensor of shape " + to_string(shape()));
    }
    return node_->value[0];
  }

  Scalar& operator[](std::int64_t flat) { return node_->value[static_cast<std::size_t>(flat)]; }
  Scalar operator[](std::int64_t flat) const { return node_->value[static_cast<std::size_t>(flat)]; }

  /// Element access by full multi-index; intended for tests and oracles.
  Scalar at(std::initializer_list<std::int64_t> index) const {
    return node_->value[static_cast<std::size_t>(offset(index))];
  }
  Scalar& at(std::initializer_list<std::int64_t> index) {
    return node_->value[static_cast<std::size_t>(offset(index))];
  }

  /// Deep copy of the values, detached from any tape.
  Tensor clone() const { return Tensor(shape(), node_->value); }

  /// Same values converted to another scalar type, detached.
  template <typename Other>
  Tensor<Other> cast() const {
    std::vector<Other> out(node_->value.begin(), node_->value.end());
    return Tensor<Other>(shape(), std::move(out));
  }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  static void validate(const Shape& shape) {
    for (auto d : shape) {
      if (d <= 0) throw ShapeError("non-positive extent in shape " + to_string(shape));
    }
  }

  std::int64_t offset(std::initializer_list<std::int64_t> index) const {
    if (static_cast<int>(index.size()) != rank()) {
      throw ShapeError("index rank mismatch for shape " + to_string(shape()));
    }
    std::int64_t flat = 0;
    std::size_t i = 0;
    for (auto v : index) {
      flat = flat * node_->shape[i] + v;
      ++i;
    }
    return flat;
  }

  std::shared_ptr<Node> node_;
};

template <typename Scalar>
class Tape;

namespace detail {
template <typename Scalar>
Tape<Scalar>*& active_tape() {
  thread_local Tape<Scalar>* tape = nullptr;
  return tape;
}
}  // namespace detail

/// Ordered record of backward rules. Confined to the thread that owns it.
template <typename Scalar>
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(BackwardFn fn) { records_.push_back(std::move(fn)); }
  std::size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }

  /// Seeds d(loss)/d(loss) = 1 and replays the records in reverse order.
  /// Each record runs exactly once; the tape is cleared afterwards.
  void backward(const Tensor<Scalar>& loss) {
    if (!loss.defined() || loss.numel() != 1) {
      throw UsageError("backward() requires a scalar loss, got shape " +
                       (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
    }
    if (!loss.requires_grad()) {
      throw UsageError("backward() on a loss that was not produced through the tape");
    }
    auto& g = loss.node()->grad_buffer();
    g[0] += Scalar(1);
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
    records_.clear();
  }

  static Tape* active() { return detail::active_tape<Scalar>(); }

 private:
  std::vector<BackwardFn> records_;
};

/// Makes `tape` the active tape of this thread for the scope's lifetime.
template <typename Scalar>
class TapeScope {
 public:
  explicit TapeScope(Tape<Scalar>& tape) : previous_(detail::active_tape<Scalar>()) {
    detail::active_tape<Scalar>() = &tape;
  }
  ~TapeScope() { detail::active_tape<Scalar>() = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<Scalar>* previous_;
};

/// Suspends recording on this thread (e.g. for evaluation inside a step).
template <typename Scalar>
class NoGradScope {
 public:
  NoGradScope() : previous_(detail::active_tape<Scalar>()) {
    detail::active_tape<Scalar>() = nullptr;
  }
  ~NoGradScope() { detail::active_tape<Scalar>() = previous_; }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape<Scalar>* previous_;
};

/// Runs the backward pass of the active tape from `loss`.
template <typename Scalar>
void backward(const Tensor<Scalar>& loss) {
  auto* tape = Tape<Scalar>::active();
  if (tape == nullptr) throw UsageError("backward() called with no active tape");
  tape->backward(loss);
}

namespace detail {

/// Active tape if any input requires a gradient, otherwise null.
template <typename Scalar, typename... Ts>
Tape<Scalar>* recording(const Ts&... inputs) {
  auto* tape = Tape<Scalar>::active();
  if (tape == nullptr) return nullptr;
  const bool any = ((inputs.defined() && inputs.requires_grad()) || ...);
  return any ? tape : nullptr;
}

/// Adds `src` into the gradient buffer of `node` if it participates.
template <typename Scalar>
void accumulate(TensorNode<Scalar>& node, std::span<const Scalar> src) {
  if (!node.requires_grad) return;
  auto& g = node.grad_buffer();
  for (std::size_t i = 0; i < src.size(); ++i) g[i] += src[i];
}

}  // namespace detail

template <typename Scalar>
bool all_finite(const Tensor<Scalar>& t) {
  return std::all_of(t.values().begin(), t.values().end(),
                     [](Scalar v) { return std::isfinite(v); });
}

/// Bitwise equality of shape and contents.
template <typename Scalar>
bool same_values(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data(), b.data(), sizeof(Scalar) * static_cast<std::size_t>(a.numel())) == 0;
}

}  // namespace omnisr

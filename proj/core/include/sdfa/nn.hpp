#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sdfa/tensor.hpp"

namespace sdfa::nn {

// Learnable tensor: value plus a gradient accumulator and the momentum
// buffer the optimizer owns. Gradients are zeroed at the start of each
// optimization step, never implicitly.
template <class S>
struct Param {
  Tensor4<S> value, grad, velocity;

  Param() = default;
  explicit Param(Shape4 shape) : value(shape), grad(shape), velocity(shape) {}

  static Param matrix(int rows, int cols) { return Param(Shape4{rows, cols, 1, 1}); }
  static Param vec(int n) { return Param(Shape4{n, 1, 1, 1}); }

  int rows() const { return value.shape.n; }
  int cols() const { return value.shape.c; }

  S& m(int r, int c) { return value.data[static_cast<std::size_t>(r) * cols() + c]; }
  S m(int r, int c) const { return value.data[static_cast<std::size_t>(r) * cols() + c]; }

  std::size_t size() const { return value.size(); }
  void zero_grad() { grad.fill(S(0)); }
};

// Per-channel batch normalization state. gamma/beta are learnable; the
// running statistics follow batch statistics with exponential smoothing and
// drive eval-mode normalization.
template <class S>
struct BatchNorm {
  Param<S> gamma, beta;
  AlignedBuffer<S> running_mean, running_var;
  S momentum = S(0.1);
  S epsilon = S(1e-5);

  BatchNorm() = default;
  explicit BatchNorm(int channels)
      : gamma(Param<S>::vec(channels)),
        beta(Param<S>::vec(channels)),
        running_mean(channels, S(0)),
        running_var(channels, S(1)) {
    gamma.value.fill(S(1));
  }

  int channels() const { return gamma.rows(); }
};

// A node of the recorded computation. Gradient storage is allocated on
// demand during the backward pass.
template <class S>
struct Node {
  Tensor4<S> value;
  Tensor4<S> grad;
  bool needs_grad = true;

  void ensure_grad() {
    if (grad.data.empty()) grad = Tensor4<S>(value.shape);
  }
};

template <class S>
using Var = std::shared_ptr<Node<S>>;

template <class S>
Var<S> make_var(Tensor4<S> value, bool needs_grad = true) {
  auto node = std::make_shared<Node<S>>();
  node->value = std::move(value);
  node->needs_grad = needs_grad;
  return node;
}

// Network inputs: values that never receive gradients.
template <class S>
Var<S> make_input(Tensor4<S> value) {
  return make_var(std::move(value), false);
}

// Reverse-mode tape. Ops append their backward closures during the forward
// pass; backward() replays them in reverse after seeding d(loss) = 1.
// With recording disabled the ops run forward-only (eval mode).
template <class S>
class Tape {
 public:
  bool recording = true;

  void record(std::function<void()> back) {
    if (recording) ops_.push_back(std::move(back));
  }

  std::size_t recorded() const { return ops_.size(); }

  void backward(const Var<S>& loss) {
    if (ops_.empty()) {
      throw UsageError("backward called before any forward pass was recorded");
    }
    if (loss->value.shape.size() != 1) {
      throw UsageError("backward target must be a scalar, got " +
                       loss->value.shape.str());
    }
    loss->ensure_grad();
    loss->grad.data[0] = S(1);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    ops_.clear();
  }

  void clear() { ops_.clear(); }

 private:
  std::vector<std::function<void()>> ops_;
};

}  // namespace sdfa::nn

#pragma once

#include <cmath>
#include <cstddef>
#include <new>
#include <string>
#include <vector>

#include "sdfa/errors.hpp"

namespace sdfa {

// 64-byte-aligned storage for every numeric buffer the SIMD kernels touch.
// Fixed alignment keeps vectorized reduction order identical from run to run,
// which the bit-reproducibility guarantees depend on.
template <class T, std::size_t Align = 64>
struct AlignedAllocator {
  using value_type = T;

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U, Align>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(Align)));
  }
  void deallocate(T* p, std::size_t) noexcept {
    ::operator delete(p, std::align_val_t(Align));
  }

  template <class U>
  struct rebind {
    using other = AlignedAllocator<U, Align>;
  };
  bool operator==(const AlignedAllocator&) const noexcept { return true; }
  bool operator!=(const AlignedAllocator&) const noexcept { return false; }
};

template <class S>
using AlignedBuffer = std::vector<S, AlignedAllocator<S>>;

// Shape of a rank-4 feature tensor: (batch N, channels C, frames T, joints V).
struct Shape4 {
  int n = 0, c = 0, t = 0, v = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(n) * c * static_cast<std::size_t>(t) * v;
  }
  bool operator==(const Shape4&) const = default;

  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(t) + "," + std::to_string(v) + ")";
  }
};

// Dense rank-4 value grid, batch-major with the joint axis fastest.
// Scalar type S is float for training/inference and double for the
// finite-difference and oracle test paths.
template <class S>
struct Tensor4 {
  Shape4 shape;
  AlignedBuffer<S> data;

  Tensor4() = default;
  explicit Tensor4(Shape4 s, S fill = S(0)) : shape(s), data(s.size(), fill) {}
  Tensor4(int n, int c, int t, int v, S fill = S(0))
      : Tensor4(Shape4{n, c, t, v}, fill) {}

  std::size_t index(int n, int c, int t, int v) const {
    return ((static_cast<std::size_t>(n) * shape.c + c) * shape.t + t) *
               shape.v + v;
  }
  S& at(int n, int c, int t, int v) { return data[index(n, c, t, v)]; }
  S at(int n, int c, int t, int v) const { return data[index(n, c, t, v)]; }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  void fill(S value) { std::fill(data.begin(), data.end(), value); }

  bool all_finite() const {
    for (S x : data) {
      if (!std::isfinite(static_cast<double>(x))) return false;
    }
    return true;
  }
};

template <class S>
void check_same_shape(const Tensor4<S>& a, const Tensor4<S>& b,
                      const char* where) {
  if (!(a.shape == b.shape)) {
    throw ShapeError(std::string(where) + ": " + a.shape.str() + " vs " +
                     b.shape.str());
  }
}

template <class S>
double max_abs_diff(const Tensor4<S>& a, const Tensor4<S>& b) {
  check_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a.data[i]) -
                             static_cast<double>(b.data[i])));
  }
  return m;
}

}  // namespace sdfa

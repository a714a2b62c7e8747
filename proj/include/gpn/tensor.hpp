// Dense row-major tensor of doubles plus the three matrix kernels the
// reverse-mode graph is built on. Training arithmetic is 64-bit throughout;
// 32-bit conversion happens only at checkpoint serialization.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gpn/errors.hpp"
#include "gpn/rng.hpp"

namespace gpn {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), 0.0);
  }
  Tensor(std::vector<std::size_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != numel_of(shape)) {
      throw ShapeError("tensor data length does not match shape product");
    }
  }

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<std::size_t> s, double v) {
    Tensor t(std::move(s));
    for (double& x : t.data) x = v;
    return t;
  }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  // Entries uniform in [-bound, bound].
  static Tensor uniform(std::vector<std::size_t> s, double bound, Rng& rng) {
    Tensor t(std::move(s));
    for (double& x : t.data) x = rng.uniform(-bound, bound);
    return t;
  }

  std::size_t numel() const { return data.size(); }
  std::size_t ndim() const { return shape.size(); }
  // 2-D accessors; 1-D tensors are treated as a single row.
  std::size_t rows() const { return shape.size() >= 2 ? shape[0] : 1; }
  std::size_t cols() const { return shape.size() >= 2 ? shape[1] : (shape.empty() ? 1 : shape[0]); }

  double& at(std::size_t i) { return data[i]; }
  double at(std::size_t i) const { return data[i]; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;

  std::string shape_str() const;
};

// C += A * B               (A: m x k, B: k x n, C: m x n)
// Skips exact-zero entries of A, which makes spike matrices and binned
// event counts cheap without changing the result (the skipped terms are
// exact zeros, so the floating-point sum is unchanged).
void mm_nn_acc(const Tensor& a, const Tensor& b, Tensor& c);

// C += A^T * B             (A: m x k, B: m x n, C: k x n)
// Outer-product form; same zero-skip on A. Used for weight gradients.
void mm_tn_acc(const Tensor& a, const Tensor& b, Tensor& c);

// C += A * B^T             (A: m x k, B: n x k, C: m x n)
// Dot-product form; slower, used only where no transposed copy exists.
void mm_nt_acc(const Tensor& a, const Tensor& b, Tensor& c);

Tensor transpose(const Tensor& a);

}  // namespace gpn

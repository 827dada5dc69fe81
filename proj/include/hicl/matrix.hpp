#pragma once

// Minimal dense row-major matrix over double. The parameter tensors here are
// tiny (at most a few thousand rows), so a dependency-free type keeps the
// numeric path easy to audit and bitwise reproducible.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "hicl/common.hpp"

namespace hicl {

class Matrix {
 public:
  Matrix() = default;
  Matrix(size_t rows, size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator()(size_t r, size_t c) { return values_[r * cols_ + c]; }
  double operator()(size_t r, size_t c) const { return values_[r * cols_ + c]; }

  double& at_flat(size_t i) { return values_[i]; }
  double at_flat(size_t i) const { return values_[i]; }

  std::span<const double> row(size_t r) const {
    return std::span<const double>(values_.data() + r * cols_, cols_);
  }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  void fill(double v) { std::fill(values_.begin(), values_.end(), v); }

  bool all_finite() const {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.values_ == b.values_;
  }

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<double> values_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

// y = M x
inline std::vector<double> matvec(const Matrix& m, std::span<const double> x) {
  std::vector<double> y(m.rows(), 0.0);
  for (size_t r = 0; r < m.rows(); ++r) y[r] = dot(m.row(r), x);
  return y;
}

// y = M^T x
inline std::vector<double> matvec_transposed(const Matrix& m, std::span<const double> x) {
  std::vector<double> y(m.cols(), 0.0);
  for (size_t r = 0; r < m.rows(); ++r) {
    const double xr = x[r];
    const auto row = m.row(r);
    for (size_t c = 0; c < m.cols(); ++c) y[c] += row[c] * xr;
  }
  return y;
}

// M += scale * a b^T
inline void add_scaled_outer(Matrix& m, std::span<const double> a,
                             std::span<const double> b, double scale = 1.0) {
  for (size_t r = 0; r < m.rows(); ++r) {
    const double ar = scale * a[r];
    for (size_t c = 0; c < m.cols(); ++c) m(r, c) += ar * b[c];
  }
}

inline void fill_uniform(Matrix& m, Rng& rng, double scale) {
  for (double& v : m.values()) v = rng.uniform_pm1() * scale;
}

}  // namespace hicl

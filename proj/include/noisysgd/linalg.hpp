#pragma once

// Dense row-major vectors and matrices in double precision.
//
// Accumulation order is fixed (row-major, left to right) so that norms and
// products are bit-stable within one build.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "noisysgd/error.hpp"

namespace noisysgd {

namespace detail {

inline bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

inline void require_finite(std::span<const double> xs, const char* what) {
  if (!all_finite(xs)) {
    throw InvalidArgument(std::string(what) + ": non-finite element");
  }
}

}  // namespace detail

class Vector {
 public:
  Vector() = default;

  explicit Vector(std::size_t n, double fill = 0.0) : values_(n, fill) {
    if (n == 0) throw InvalidArgument("Vector: length must be positive");
    detail::require_finite(values_, "Vector");
  }

  Vector(std::initializer_list<double> values) : Vector(std::vector<double>(values)) {}

  explicit Vector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw InvalidArgument("Vector: length must be positive");
    detail::require_finite(values_, "Vector");
  }

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }
  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }

  /// Finiteness is only enforced at construction; arithmetic can overflow.
  bool all_finite() const noexcept { return detail::all_finite(values_); }

  void fill(double v) noexcept { std::fill(values_.begin(), values_.end(), v); }

  Vector& operator+=(const Vector& o) {
    require_same_length(o, "operator+=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  Vector& operator-=(const Vector& o) {
    require_same_length(o, "operator-=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  Vector& operator*=(double s) noexcept {
    for (double& v : values_) v *= s;
    return *this;
  }

  friend Vector operator+(Vector a, const Vector& b) { return a += b; }
  friend Vector operator-(Vector a, const Vector& b) { return a -= b; }
  friend Vector operator*(double s, Vector a) { return a *= s; }

  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  void require_same_length(const Vector& o, const char* op) const {
    if (o.size() != size()) {
      throw ShapeError(std::string("Vector::") + op + ": lengths " + std::to_string(size()) +
                       " and " + std::to_string(o.size()));
    }
  }

  std::vector<double> values_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("dot: lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(std::span<const double> a) noexcept {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

inline double euclidean_norm(std::span<const double> a) noexcept {
  return std::sqrt(squared_norm(a));
}

class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {
    if (rows == 0 || cols == 0) throw InvalidArgument("Matrix: dimensions must be positive");
    detail::require_finite(values_, "Matrix");
  }

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
      : rows_(rows), cols_(cols), values_(std::move(row_major)) {
    if (rows == 0 || cols == 0) throw InvalidArgument("Matrix: dimensions must be positive");
    if (values_.size() != rows * cols) {
      throw ShapeError("Matrix: " + std::to_string(rows) + "x" + std::to_string(cols) +
                       " needs " + std::to_string(rows * cols) + " elements, got " +
                       std::to_string(values_.size()));
    }
    detail::require_finite(values_, "Matrix");
  }

  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    if (rows_ == 0 || cols_ == 0) throw InvalidArgument("Matrix: dimensions must be positive");
    values_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer");
      values_.insert(values_.end(), r.begin(), r.end());
    }
    detail::require_finite(values_, "Matrix");
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }

  double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const noexcept {
    return {values_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  bool all_finite() const noexcept { return detail::all_finite(values_); }

  std::string shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// out = m * v, with out already sized m.rows().
inline void matvec_into(const Matrix& m, std::span<const double> v, std::span<double> out) {
  if (m.cols() != v.size() || m.rows() != out.size()) {
    throw ShapeError("matvec: matrix " + m.shape_string() + " with vector of length " +
                     std::to_string(v.size()));
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* row = m.values().data() + r * m.cols();
    double s = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) s += row[c] * v[c];
    out[r] = s;
  }
}

inline Vector matvec(const Matrix& m, const Vector& v) {
  if (m.cols() != v.size()) {
    throw ShapeError("matvec: matrix " + m.shape_string() + " with vector of length " +
                     std::to_string(v.size()));
  }
  Vector out(m.rows());
  matvec_into(m, v.values(), out.values());
  return out;
}

/// out = m^T * v, accumulated row by row of m.
inline void matvec_transposed_into(const Matrix& m, std::span<const double> v,
                                   std::span<double> out) {
  if (m.rows() != v.size() || m.cols() != out.size()) {
    throw ShapeError("matvec_transposed: matrix " + m.shape_string() +
                     " with vector of length " + std::to_string(v.size()));
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double vr = v[r];
    if (vr == 0.0) continue;
    const double* row = m.values().data() + r * m.cols();
    for (std::size_t c = 0; c < m.cols(); ++c) out[c] += row[c] * vr;
  }
}

/// Sum of squared entries, accumulated one row at a time.
inline double frobenius_norm_squared(const Matrix& m) noexcept {
  double total = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) total += squared_norm(m.row(r));
  return total;
}

inline double frobenius_norm(const Matrix& m) noexcept {
  return std::sqrt(frobenius_norm_squared(m));
}

}  // namespace noisysgd

/*
 * Copyright 2026 The fedcgs Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "fedcgs/errors.hpp"

namespace fedcgs {

/// Dense real vector (row-vector convention for features).
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}
  explicit Vector(std::span<const double> values) : data_(values.begin(), values.end()) {}

  std::size_t dim() const { return data_.size(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  Vector& operator+=(std::span<const double> other) {
    detail::require_dim(other.size(), dim(), "Vector +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other[i];
    return *this;
  }
  Vector& operator+=(const Vector& other) { return *this += other.span(); }
  Vector& operator*=(double s) {
    for (auto& x : data_) x *= s;
    return *this;
  }

  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  detail::require_dim(b.size(), a.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Symmetric d x d matrix stored densely. Mutation goes through symmetric
/// updates only, so both triangles stay bit-identical.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(std::size_t dim) : dim_(dim), data_(dim * dim, 0.0) {}

  static SymmetricMatrix identity(std::size_t n) {
    SymmetricMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) m.data_[i * n + i] = 1.0;
    return m;
  }

  /// Builds from a full square matrix; throws if it is not exactly symmetric.
  static SymmetricMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    SymmetricMatrix m(rows.size());
    std::size_t r = 0;
    for (const auto& row : rows) {
      detail::require_dim(row.size(), m.dim_, "SymmetricMatrix::from_rows");
      std::size_t c = 0;
      for (double v : row) m.data_[r * m.dim_ + c++] = v;
      ++r;
    }
    if (!m.is_symmetric()) throw Error("SymmetricMatrix::from_rows: input is not symmetric");
    return m;
  }

  std::size_t dim() const { return dim_; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * dim_ + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * dim_, dim_}; }
  std::span<const double> flat() const { return data_; }

  /// Sets entries (r, c) and (c, r) together.
  void set(std::size_t r, std::size_t c, double v) {
    data_[r * dim_ + c] = v;
    data_[c * dim_ + r] = v;
  }

  /// In-place rank-1 update: this += v^T v.
  void add_outer(std::span<const double> v) {
    detail::require_dim(v.size(), dim_, "outer_accumulate");
    for (std::size_t r = 0; r < dim_; ++r) {
      const double vr = v[r];
      double* row_r = data_.data() + r * dim_;
      for (std::size_t c = r; c < dim_; ++c) {
        const double updated = row_r[c] + vr * v[c];
        row_r[c] = updated;
        data_[c * dim_ + r] = updated;
      }
    }
  }

  SymmetricMatrix& operator+=(const SymmetricMatrix& other) {
    detail::require_dim(other.dim_, dim_, "SymmetricMatrix +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  SymmetricMatrix& operator*=(double s) {
    for (auto& x : data_) x *= s;
    return *this;
  }

  double trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) t += data_[i * dim_ + i];
    return t;
  }

  bool is_symmetric() const {
    for (std::size_t r = 0; r < dim_; ++r)
      for (std::size_t c = r + 1; c < dim_; ++c)
        if (data_[r * dim_ + c] != data_[c * dim_ + r]) return false;
    return true;
  }

  /// Replaces the matrix by (M + M^T) / 2.
  void symmetrize() {
    for (std::size_t r = 0; r < dim_; ++r)
      for (std::size_t c = r + 1; c < dim_; ++c) {
        const double avg = 0.5 * (data_[r * dim_ + c] + data_[c * dim_ + r]);
        data_[r * dim_ + c] = avg;
        data_[c * dim_ + r] = avg;
      }
  }

  /// Mutable access for assembly code that symmetrizes afterwards.
  std::span<double> raw() { return data_; }

  friend bool operator==(const SymmetricMatrix&, const SymmetricMatrix&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Returns acc + v^T v.
inline SymmetricMatrix outer_accumulate(SymmetricMatrix acc, std::span<const double> v) {
  acc.add_outer(v);
  return acc;
}

inline Vector multiply(const SymmetricMatrix& m, std::span<const double> x) {
  detail::require_dim(x.size(), m.dim(), "multiply");
  Vector y(m.dim());
  for (std::size_t r = 0; r < m.dim(); ++r) y[r] = dot(m.row(r), x);
  return y;
}

/// Frobenius norm of a - b.
inline double frobenius_distance(const SymmetricMatrix& a, const SymmetricMatrix& b) {
  detail::require_dim(b.dim(), a.dim(), "frobenius_distance");
  double s = 0.0;
  const auto fa = a.flat();
  const auto fb = b.flat();
  for (std::size_t i = 0; i < fa.size(); ++i) {
    const double diff = fa[i] - fb[i];
    s += diff * diff;
  }
  return std::sqrt(s);
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
class Cholesky {
 public:
  explicit Cholesky(const SymmetricMatrix& m) : dim_(m.dim()), lower_(m.dim() * m.dim(), 0.0) {
    const std::size_t n = dim_;
    for (std::size_t j = 0; j < n; ++j) {
      double pivot = m(j, j);
      for (std::size_t k = 0; k < j; ++k) pivot -= lower_[j * n + k] * lower_[j * n + k];
      if (!(pivot > 0.0) || !std::isfinite(pivot)) {
        throw NotPositiveDefinite("Cholesky: non-positive pivot " + std::to_string(pivot) +
                                  " at column " + std::to_string(j));
      }
      const double diag = std::sqrt(pivot);
      lower_[j * n + j] = diag;
      for (std::size_t i = j + 1; i < n; ++i) {
        double s = m(i, j);
        for (std::size_t k = 0; k < j; ++k) s -= lower_[i * n + k] * lower_[j * n + k];
        lower_[i * n + j] = s / diag;
      }
    }
  }

  std::size_t dim() const { return dim_; }
  double lower(std::size_t r, std::size_t c) const { return lower_[r * dim_ + c]; }

  /// Solves m x = rhs by forward then backward substitution.
  Vector solve(std::span<const double> rhs) const {
    detail::require_dim(rhs.size(), dim_, "cholesky_solve");
    const std::size_t n = dim_;
    Vector x(rhs);
    for (std::size_t i = 0; i < n; ++i) {
      double s = x[i];
      for (std::size_t k = 0; k < i; ++k) s -= lower_[i * n + k] * x[k];
      x[i] = s / lower_[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = x[i];
      for (std::size_t k = i + 1; k < n; ++k) s -= lower_[k * n + i] * x[k];
      x[i] = s / lower_[i * n + i];
    }
    return x;
  }

  /// Solves column by column; rhs is d x k.
  Matrix solve(const Matrix& rhs) const {
    detail::require_dim(rhs.rows(), dim_, "cholesky_solve");
    Matrix out(rhs.rows(), rhs.cols());
    Vector column(dim_);
    for (std::size_t c = 0; c < rhs.cols(); ++c) {
      for (std::size_t r = 0; r < dim_; ++r) column[r] = rhs(r, c);
      const Vector x = solve(column.span());
      for (std::size_t r = 0; r < dim_; ++r) out(r, c) = x[r];
    }
    return out;
  }

 private:
  std::size_t dim_;
  std::vector<double> lower_;
};

inline Vector cholesky_solve(const SymmetricMatrix& m, std::span<const double> rhs) {
  return Cholesky(m).solve(rhs);
}

inline Matrix cholesky_solve(const SymmetricMatrix& m, const Matrix& rhs) {
  return Cholesky(m).solve(rhs);
}

}  // namespace fedcgs

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tslab/errors.hpp"
#include "tslab/rng.hpp"

namespace tslab {

/// Dense row-major matrix of doubles. Entries are checked for finiteness when
/// constructed from data; element access is unchecked.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  Matrix transposed() const;

  /// Copy of the rectangular block starting at (r0, c0).
  Matrix block(std::size_t r0, std::size_t c0, std::size_t nrows, std::size_t ncols) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Dense vector of doubles; finite on construction.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t len) : data_(len, 0.0) {}
  explicit Vector(std::vector<double> data);
  Vector(std::initializer_list<double> values) : Vector(std::vector<double>(values)) {}

  std::size_t size() const noexcept { return data_.size(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& a, std::span<const double> x);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);

/// max_ij |a_ij - b_ij|; shapes must agree.
double max_abs_diff(const Matrix& a, const Matrix& b);
double max_abs(std::span<const double> v);

/// LU factorization with partial pivoting of a square matrix.
class LuDecomposition {
 public:
  /// Throws SingularMatrix when a pivot falls below 1e-12 times the largest
  /// absolute entry of the input.
  explicit LuDecomposition(const Matrix& m);

  Matrix solve(const Matrix& rhs) const;
  Matrix inverse() const;
  double determinant() const;

 private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
  int sign_ = 1;
};

/// Inverse of a square matrix via pivoted LU.
Matrix solve_or_invert(const Matrix& m);

/// Moore-Penrose inverse of a full-column-rank matrix: (AᵀA)⁻¹Aᵀ.
Matrix left_pseudo_inverse(const Matrix& a);
/// Moore-Penrose inverse of a full-row-rank matrix: Aᵀ(AAᵀ)⁻¹.
Matrix right_pseudo_inverse(const Matrix& a);

/// Haar-distributed orthogonal matrix (Householder QR of a Gaussian matrix
/// with the sign of R's diagonal folded into Q).
Matrix random_orthogonal(std::size_t n, SeededRng& rng);

/// n×n matrix Q·diag(s) with s_i uniform in [min_singular, 1]; its singular
/// values are exactly the s_i, so the smallest is at least min_singular.
Matrix random_regular(std::size_t n, SeededRng& rng, double min_singular = 0.1);

/// Eigenvalues of a symmetric matrix in descending order (cyclic Jacobi).
std::vector<double> symmetric_eigenvalues(const Matrix& sym);

}  // namespace tslab

#include "tslab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace tslab {
namespace {

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) fail(ErrorKind::NonFinite, std::string(what) + " contains a non-finite entry");
  }
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorKind::DimensionMismatch,
         std::string(op) + ": " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
             std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    fail(ErrorKind::DimensionMismatch, "matrix data length " + std::to_string(data_.size()) + " != " +
                                           std::to_string(rows_) + "x" + std::to_string(cols_));
  }
  require_finite(data_, "matrix");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) fail(ErrorKind::DimensionMismatch, "ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
  require_finite(data_, "matrix");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix Matrix::block(std::size_t r0, std::size_t c0, std::size_t nrows, std::size_t ncols) const {
  if (r0 + nrows > rows_ || c0 + ncols > cols_) fail(ErrorKind::DimensionMismatch, "block out of range");
  Matrix b(nrows, ncols);
  for (std::size_t i = 0; i < nrows; ++i)
    for (std::size_t j = 0; j < ncols; ++j) b(i, j) = (*this)(r0 + i, c0 + j);
  return b;
}

Vector::Vector(std::vector<double> data) : data_(std::move(data)) { require_finite(data_, "vector"); }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorKind::DimensionMismatch, "matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                           " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto crow = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Vector matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) fail(ErrorKind::DimensionMismatch, "matvec: column count != vector length");
  std::vector<double> y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    y[i] = std::inner_product(r.begin(), r.end(), x.begin(), 0.0);
  }
  return Vector(std::move(y));
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
  return c;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "subtract");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
  return c;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

LuDecomposition::LuDecomposition(const Matrix& m) : lu_(m), perm_(m.rows()) {
  if (m.rows() != m.cols()) fail(ErrorKind::DimensionMismatch, "LU of a non-square matrix");
  const std::size_t n = m.rows();
  std::iota(perm_.begin(), perm_.end(), std::size_t{0});
  const double scale = max_abs(m.data());
  const double tiny = 1e-12 * scale;
  if (n > 0 && scale == 0.0) fail(ErrorKind::SingularMatrix, "zero matrix");

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(lu_(i, k)) > std::abs(lu_(p, k))) p = i;
    if (std::abs(lu_(p, k)) <= tiny) {
      fail(ErrorKind::SingularMatrix, "pivot " + std::to_string(k) + " below 1e-12 x max|entry|");
    }
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu_(p, j), lu_(k, j));
      std::swap(perm_[p], perm_[k]);
      sign_ = -sign_;
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu_(i, k) / lu_(k, k);
      lu_(i, k) = f;
      for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
    }
  }
}

Matrix LuDecomposition::solve(const Matrix& rhs) const {
  const std::size_t n = lu_.rows();
  if (rhs.rows() != n) fail(ErrorKind::DimensionMismatch, "LU solve: rhs row count");
  Matrix x(n, rhs.cols());
  for (std::size_t c = 0; c < rhs.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = rhs(perm_[i], c);
      for (std::size_t j = 0; j < i; ++j) s -= lu_(i, j) * x(j, c);
      x(i, c) = s;
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = x(i, c);
      for (std::size_t j = i + 1; j < n; ++j) s -= lu_(i, j) * x(j, c);
      x(i, c) = s / lu_(i, i);
    }
  }
  return x;
}

Matrix LuDecomposition::inverse() const { return solve(Matrix::identity(lu_.rows())); }

double LuDecomposition::determinant() const {
  double d = sign_;
  for (std::size_t i = 0; i < lu_.rows(); ++i) d *= lu_(i, i);
  return d;
}

Matrix solve_or_invert(const Matrix& m) { return LuDecomposition(m).inverse(); }

Matrix left_pseudo_inverse(const Matrix& a) {
  const Matrix at = a.transposed();
  return LuDecomposition(matmul(at, a)).solve(at);
}

Matrix right_pseudo_inverse(const Matrix& a) {
  const Matrix at = a.transposed();
  // Aᵀ(AAᵀ)⁻¹ = ((AAᵀ)⁻¹A)ᵀ since AAᵀ is symmetric.
  return LuDecomposition(matmul(a, at)).solve(a).transposed();
}

Matrix random_orthogonal(std::size_t n, SeededRng& rng) {
  Matrix a(n, n);
  for (double& v : a.data()) v = rng.normal();

  // Householder QR; accumulate Q explicitly.
  Matrix q = Matrix::identity(n);
  std::vector<double> diag_sign(n, 1.0);
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) {
    double norm = 0.0;
    for (std::size_t i = k; i < n; ++i) norm += a(i, k) * a(i, k);
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    const double alpha = a(k, k) > 0 ? -norm : norm;
    std::fill(v.begin(), v.end(), 0.0);
    for (std::size_t i = k; i < n; ++i) v[i] = a(i, k);
    v[k] -= alpha;
    double vnorm2 = 0.0;
    for (std::size_t i = k; i < n; ++i) vnorm2 += v[i] * v[i];
    if (vnorm2 == 0.0) {
      diag_sign[k] = alpha < 0 ? -1.0 : 1.0;
      continue;
    }
    // A <- H A, Q <- Q H with H = I - 2 v vᵀ / (vᵀv)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < n; ++i) s += v[i] * a(i, j);
      s *= 2.0 / vnorm2;
      for (std::size_t i = k; i < n; ++i) a(i, j) -= s * v[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = k; j < n; ++j) s += q(i, j) * v[j];
      s *= 2.0 / vnorm2;
      for (std::size_t j = k; j < n; ++j) q(i, j) -= s * v[j];
    }
    diag_sign[k] = a(k, k) < 0 ? -1.0 : 1.0;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) q(i, j) *= diag_sign[j];
  return q;
}

Matrix random_regular(std::size_t n, SeededRng& rng, double min_singular) {
  if (n == 0) fail(ErrorKind::DimensionMismatch, "random_regular needs n >= 1");
  if (!(min_singular > 0.0 && min_singular < 1.0)) {
    fail(ErrorKind::InvalidConfig, "min_singular must lie in (0, 1)");
  }
  Matrix q = random_orthogonal(n, rng);
  for (std::size_t j = 0; j < n; ++j) {
    const double s = rng.uniform(min_singular, 1.0);
    for (std::size_t i = 0; i < n; ++i) q(i, j) *= s;
  }
  return q;
}

std::vector<double> symmetric_eigenvalues(const Matrix& sym) {
  if (sym.rows() != sym.cols()) fail(ErrorKind::DimensionMismatch, "eigenvalues of a non-square matrix");
  const std::size_t n = sym.rows();
  Matrix a = sym;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        total += a(i, j) * a(i, j);
        if (i != j) off += a(i, j) * a(i, j);
      }
    }
    if (off <= 1e-30 * total || off == 0.0) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  std::sort(ev.begin(), ev.end(), std::greater<>());
  return ev;
}

}  // namespace tslab

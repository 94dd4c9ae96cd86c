#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "matcha/error.hpp"
#include "matcha/matrix.hpp"

// Small dense double-precision kernels used by the estimators: linear
// solves, Cholesky, and the Jacobi eigensolver for symmetric matrices.
namespace matcha::linalg {

inline constexpr double kPivotTolerance = 1e-10;

// Row-major double matrix for the estimators' internal arithmetic.
struct Dense {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  Dense() = default;
  Dense(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) noexcept { return v[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return v[i * cols + j]; }

  static Dense identity(std::size_t n) {
    Dense d(n, n);
    for (std::size_t i = 0; i < n; ++i) d(i, i) = 1.0;
    return d;
  }
};

inline Dense to_dense(const Matrix& m) {
  Dense d(m.rows(), m.cols());
  const auto raw = m.storage_data();
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) d(i, j) = raw[m.offset(i, j)];
  return d;
}

inline Matrix to_matrix(const Dense& d) {
  std::vector<float> out(d.v.size());
  std::transform(d.v.begin(), d.v.end(), out.begin(), [](double x) { return static_cast<float>(x); });
  return Matrix(d.rows, d.cols, std::move(out));
}

inline Dense transpose(const Dense& a) {
  Dense t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

inline Dense multiply(const Dense& a, const Dense& b) {
  if (a.cols != b.rows) throw ShapeError("dense multiply: inner dimensions differ");
  Dense c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline bool is_symmetric(const Dense& a, double tol = 1e-12) {
  if (a.rows != a.cols) return false;
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = i + 1; j < a.cols; ++j) {
      const double scale = std::max({1.0, std::fabs(a(i, j)), std::fabs(a(j, i))});
      if (std::fabs(a(i, j) - a(j, i)) > tol * scale) return false;
    }
  return true;
}

// Lower-triangular L with A = L Lᵀ, or nullopt when a pivot falls below the
// tolerance (A not numerically positive definite).
inline std::optional<Dense> cholesky(const Dense& a) {
  const std::size_t n = a.rows;
  Dense l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > kPivotTolerance)) return std::nullopt;
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

// Solves L X = B for lower-triangular L.
inline Dense forward_substitute(const Dense& l, const Dense& b) {
  Dense x = b;
  for (std::size_t c = 0; c < b.cols; ++c)
    for (std::size_t i = 0; i < l.rows; ++i) {
      double s = x(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
      x(i, c) = s / l(i, i);
    }
  return x;
}

// Solves Lᵀ X = B for lower-triangular L.
inline Dense backward_substitute_transposed(const Dense& l, const Dense& b) {
  Dense x = b;
  const std::size_t n = l.rows;
  for (std::size_t c = 0; c < b.cols; ++c)
    for (std::size_t ii = n; ii-- > 0;) {
      double s = x(ii, c);
      for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x(k, c);
      x(ii, c) = s / l(ii, ii);
    }
  return x;
}

// Gaussian elimination with partial pivoting; B may have several columns.
inline Dense gaussian_solve(Dense a, Dense b) {
  const std::size_t n = a.rows;
  if (a.cols != n || b.rows != n) throw ShapeError("solve needs a square system with matching right-hand side");
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a(r, col)) > std::fabs(a(piv, col))) piv = r;
    if (std::fabs(a(piv, col)) < kPivotTolerance) {
      throw SingularMatrixError("matrix is singular (pivot " + std::to_string(a(piv, col)) + " in column " +
                                std::to_string(col) + ")");
    }
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(piv, j));
      for (std::size_t j = 0; j < b.cols; ++j) std::swap(b(col, j), b(piv, j));
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a(r, col) / a(col, col);
      if (f == 0.0) continue;
      for (std::size_t j = col; j < n; ++j) a(r, j) -= f * a(col, j);
      for (std::size_t j = 0; j < b.cols; ++j) b(r, j) -= f * b(col, j);
    }
  }
  for (std::size_t c = 0; c < b.cols; ++c)
    for (std::size_t ii = n; ii-- > 0;) {
      double s = b(ii, c);
      for (std::size_t k = ii + 1; k < n; ++k) s -= a(ii, k) * b(k, c);
      b(ii, c) = s / a(ii, ii);
    }
  return b;
}

// Cholesky when A is symmetric positive definite, otherwise pivoted
// elimination. Throws SingularMatrixError.
inline Dense solve(const Dense& a, const Dense& b) {
  if (is_symmetric(a)) {
    if (auto l = cholesky(a)) return backward_substitute_transposed(*l, forward_substitute(*l, b));
  }
  return gaussian_solve(a, b);
}

inline Matrix solve(const Matrix& a, const Matrix& b) { return to_matrix(solve(to_dense(a), to_dense(b))); }

struct Eigen {
  std::vector<double> values;  // descending
  Dense vectors;               // column k pairs with values[k]
};

// Cyclic Jacobi rotations for a symmetric matrix. Each eigenvector is signed
// so that its largest-magnitude entry is positive.
inline Eigen jacobi_eigen(const Dense& sym, std::size_t max_sweeps = 100) {
  if (sym.rows != sym.cols) throw ShapeError("eigendecomposition needs a square matrix");
  const std::size_t n = sym.rows;
  Dense a = sym;
  Dense v = Dense::identity(n);
  double total = 0.0;
  for (double x : a.v) total += x * x;
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= 1e-30 * total || off == 0.0) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  Eigen out;
  out.values.resize(n);
  out.vectors = Dense(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    out.values[k] = a(src, src);
    std::size_t big = 0;
    for (std::size_t r = 1; r < n; ++r)
      if (std::fabs(v(r, src)) > std::fabs(v(big, src))) big = r;
    const double sign = v(big, src) < 0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = sign * v(r, src);
  }
  return out;
}

}  // namespace matcha::linalg

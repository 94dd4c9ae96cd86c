#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "matcha/ml/common.hpp"
#include "matcha/rng.hpp"

// Column statistics and data utilities.
namespace matcha::ml::stats {

inline Matrix mean(const Matrix& x) {
  detail::require_samples(x);
  const auto d = linalg::to_dense(x);
  std::vector<float> out(x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) s += d(i, j);
    out[j] = static_cast<float>(s / static_cast<double>(x.rows()));
  }
  return Matrix(1, x.cols(), std::move(out));
}

// Population standard deviation per column; 0 for a constant column.
inline Matrix stddev(const Matrix& x) {
  detail::require_samples(x);
  const auto d = linalg::to_dense(x);
  std::vector<float> out(x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) m += d(i, j);
    m /= static_cast<double>(x.rows());
    double v = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) v += (d(i, j) - m) * (d(i, j) - m);
    out[j] = static_cast<float>(std::sqrt(v / static_cast<double>(x.rows())));
  }
  return Matrix(1, x.cols(), std::move(out));
}

// Zero mean and unit (population) variance per column. Constant columns
// become 0.
inline Matrix standardize(const Matrix& x) {
  detail::require_samples(x);
  const auto d = linalg::to_dense(x);
  const std::size_t n = x.rows(), p = x.cols();
  std::vector<float> out(n * p);
  for (std::size_t j = 0; j < p; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += d(i, j);
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += (d(i, j) - m) * (d(i, j) - m);
    const double s = std::sqrt(v / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) out[i * p + j] = s > 0.0 ? static_cast<float>((d(i, j) - m) / s) : 0.0f;
  }
  return Matrix(n, p, std::move(out));
}

// A uniformly random permutation of 0..n-1 (Fisher-Yates).
inline std::vector<std::size_t> permutation(std::size_t n, SplitMix64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

inline Matrix take_rows(const Matrix& x, const std::vector<std::size_t>& rows) {
  const auto raw = x.storage_data();
  std::vector<float> out(rows.size() * x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t j = 0; j < x.cols(); ++j) out[r * x.cols() + j] = raw[x.offset(rows[r], j)];
  return Matrix(rows.size(), x.cols(), std::move(out));
}

// Permutes the rows of x and y with one shared permutation.
inline std::pair<Matrix, Matrix> shuffle(const Matrix& x, const Matrix& y, std::uint64_t seed) {
  detail::require_samples(x);
  if (y.empty() || y.rows() != x.rows()) throw ShapeError("shuffle needs x and y with the same number of rows");
  SplitMix64 rng(seed);
  const auto perm = permutation(x.rows(), rng);
  return {take_rows(x, perm), take_rows(y, perm)};
}

}  // namespace matcha::ml::stats

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "matcha/error.hpp"
#include "matcha/matrix.hpp"

namespace matcha {

enum class ElementOp { add, sub, mul, div };
enum class ReduceOp { min, max, sum, mean };
enum class ConvMode { valid, same };

inline const char* to_string(ElementOp op) noexcept {
  switch (op) {
    case ElementOp::add: return "add";
    case ElementOp::sub: return "sub";
    case ElementOp::mul: return "mul";
    case ElementOp::div: return "div";
  }
  return "?";
}

inline float apply(ElementOp op, float a, float b) noexcept {
  switch (op) {
    case ElementOp::add: return a + b;
    case ElementOp::sub: return a - b;
    case ElementOp::mul: return a * b;
    case ElementOp::div: return a / b;
  }
  return 0.0f;
}

inline std::string shape_string(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

// True when B is added to A column-wise (B is rows x 1 and A is wider).
inline bool is_column_broadcast(const Matrix& a, const Matrix& b) noexcept {
  return b.cols() == 1 && b.rows() == a.rows() && a.cols() != 1;
}

inline void check_elementwise_shapes(const Matrix& a, const Matrix& b) {
  if (a.empty() || b.empty()) throw DimensionError("elementwise operation on an empty matrix");
  if (a.rows() == b.rows() && a.cols() == b.cols()) return;
  if (is_column_broadcast(a, b)) return;
  throw ShapeError("cannot combine " + shape_string(a) + " with " + shape_string(b) +
                   " (shapes must match or the right operand must be a column of matching height)");
}

namespace detail {

// Parallel implementations register themselves here. Core operations consult
// it and fall back to the sequential path when nothing is installed or the
// output is below the dispatch threshold.
class Accelerator {
 public:
  virtual ~Accelerator() = default;
  virtual std::size_t threshold() const noexcept = 0;
  virtual Matrix elementwise(ElementOp op, const Matrix& a, const Matrix& b) = 0;
  virtual Matrix matmul(const Matrix& a, const Matrix& b) = 0;
};

inline std::shared_ptr<Accelerator>& accelerator_slot() {
  static std::shared_ptr<Accelerator> slot;
  return slot;
}

inline Accelerator* accelerator_for(std::size_t output_elements) {
  auto& acc = accelerator_slot();
  if (acc && output_elements >= acc->threshold()) return acc.get();
  return nullptr;
}

// Element strides of a matrix in its buffer.
struct Strides {
  std::size_t row;
  std::size_t col;
};

inline Strides strides_of(const Matrix& m) noexcept {
  return m.row_major() ? Strides{m.cols(), 1} : Strides{1, m.rows()};
}

}  // namespace detail

// Reference implementations. These never dispatch and are what the parallel
// backend is checked against.
namespace sequential {

inline Matrix elementwise(ElementOp op, const Matrix& a, const Matrix& b) {
  check_elementwise_shapes(a, b);
  const auto ad = a.storage_data();
  const auto bd = b.storage_data();
  const auto as = detail::strides_of(a);
  const auto bs = detail::strides_of(b);
  const bool broadcast = is_column_broadcast(a, b);
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const float x = ad[i * as.row + j * as.col];
      const float y = broadcast ? bd[i * bs.row] : bd[i * bs.row + j * bs.col];
      out[i * a.cols() + j] = apply(op, x, y);
    }
  }
  return Matrix(a.rows(), a.cols(), std::move(out));
}

// Dot-product form with a 64-bit accumulator per output element.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.empty() || b.empty()) throw DimensionError("matmul on an empty matrix");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul inner dimensions differ: " + shape_string(a) + " * " + shape_string(b));
  }
  const auto ad = a.storage_data();
  const auto bd = b.storage_data();
  const auto as = detail::strides_of(a);
  const auto bs = detail::strides_of(b);
  const std::size_t n = a.rows(), m = b.cols(), inner = a.cols();
  std::vector<float> out(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < inner; ++k) {
        acc += static_cast<double>(ad[i * as.row + k * as.col]) * static_cast<double>(bd[k * bs.row + j * bs.col]);
      }
      out[i * m + j] = static_cast<float>(acc);
    }
  }
  return Matrix(n, m, std::move(out));
}

}  // namespace sequential

inline Matrix transpose(const Matrix& a) { return a.t(); }

inline Matrix elementwise(ElementOp op, const Matrix& a, const Matrix& b) {
  check_elementwise_shapes(a, b);
  if (auto* acc = detail::accelerator_for(a.size())) return acc->elementwise(op, a, b);
  return sequential::elementwise(op, a, b);
}

inline Matrix add(const Matrix& a, const Matrix& b) { return elementwise(ElementOp::add, a, b); }
inline Matrix sub(const Matrix& a, const Matrix& b) { return elementwise(ElementOp::sub, a, b); }
inline Matrix mul(const Matrix& a, const Matrix& b) { return elementwise(ElementOp::mul, a, b); }
inline Matrix div(const Matrix& a, const Matrix& b) { return elementwise(ElementOp::div, a, b); }

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.empty() || b.empty()) throw DimensionError("matmul on an empty matrix");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul inner dimensions differ: " + shape_string(a) + " * " + shape_string(b));
  }
  if (auto* acc = detail::accelerator_for(a.rows() * b.cols())) return acc->matmul(a, b);
  return sequential::matmul(a, b);
}

inline Matrix scale(const Matrix& a, float s) {
  auto v = a.to_vector();
  for (auto& x : v) x *= s;
  return Matrix(a.rows(), a.cols(), std::move(v));
}

inline Matrix get_col(const Matrix& a, std::size_t j) {
  if (j >= a.cols()) {
    throw IndexError("column " + std::to_string(j) + " out of range for " + shape_string(a) + " matrix");
  }
  const auto d = a.storage_data();
  std::vector<float> out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) out[i] = d[a.offset(i, j)];
  return Matrix(a.rows(), 1, std::move(out));
}

inline Matrix get_row(const Matrix& a, std::size_t i) {
  if (i >= a.rows()) {
    throw IndexError("row " + std::to_string(i) + " out of range for " + shape_string(a) + " matrix");
  }
  const auto d = a.storage_data();
  std::vector<float> out(a.cols());
  for (std::size_t j = 0; j < a.cols(); ++j) out[j] = d[a.offset(i, j)];
  return Matrix(1, a.cols(), std::move(out));
}

// Reductions run over the raw buffer; storage order does not matter.
// min/max skip NaN unless every element is NaN.
inline float reduce(ReduceOp op, const Matrix& a) {
  if (a.empty()) throw DimensionError("reduce on an empty matrix");
  const auto d = a.storage_data();
  switch (op) {
    case ReduceOp::min:
    case ReduceOp::max: {
      bool seen = false;
      float best = std::numeric_limits<float>::quiet_NaN();
      for (float v : d) {
        if (std::isnan(v)) continue;
        if (!seen || (op == ReduceOp::min ? v < best : v > best)) best = v;
        seen = true;
      }
      return best;
    }
    case ReduceOp::sum:
    case ReduceOp::mean: {
      double s = 0.0;
      for (float v : d) s += v;
      if (op == ReduceOp::mean) s /= static_cast<double>(d.size());
      return static_cast<float>(s);
    }
  }
  return 0.0f;
}

inline float min(const Matrix& a) { return reduce(ReduceOp::min, a); }
inline float max(const Matrix& a) { return reduce(ReduceOp::max, a); }
inline float sum(const Matrix& a) { return reduce(ReduceOp::sum, a); }
inline float mean(const Matrix& a) { return reduce(ReduceOp::mean, a); }

// Sum of all elements in double; used for checksums.
inline double checksum(const Matrix& a) {
  double s = 0.0;
  for (float v : a.storage_data()) s += v;
  return s;
}

// 2D convolution (kernel flipped). `valid` keeps the positions where the
// kernel fits entirely; `same` keeps A's shape, centred on the full result,
// with zeros outside A.
inline Matrix convolve2d(const Matrix& a, const Matrix& k, ConvMode mode) {
  if (a.empty() || k.empty()) throw DimensionError("convolve2d on an empty matrix");
  const std::size_t ar = a.rows(), ac = a.cols(), kr = k.rows(), kc = k.cols();
  std::size_t out_r, out_c;
  std::ptrdiff_t off_r, off_c;  // position of output (0,0) in the full result
  if (mode == ConvMode::valid) {
    if (kr > ar || kc > ac) {
      throw ShapeError("kernel " + shape_string(k) + " larger than input " + shape_string(a) + " in valid mode");
    }
    out_r = ar - kr + 1;
    out_c = ac - kc + 1;
    off_r = static_cast<std::ptrdiff_t>(kr) - 1;
    off_c = static_cast<std::ptrdiff_t>(kc) - 1;
  } else {
    out_r = ar;
    out_c = ac;
    off_r = static_cast<std::ptrdiff_t>((kr - 1) / 2);
    off_c = static_cast<std::ptrdiff_t>((kc - 1) / 2);
  }
  const auto ad = a.storage_data();
  const auto kd = k.storage_data();
  std::vector<float> out(out_r * out_c);
  for (std::size_t i = 0; i < out_r; ++i) {
    for (std::size_t j = 0; j < out_c; ++j) {
      double acc = 0.0;
      const std::ptrdiff_t fi = static_cast<std::ptrdiff_t>(i) + off_r;
      const std::ptrdiff_t fj = static_cast<std::ptrdiff_t>(j) + off_c;
      for (std::size_t p = 0; p < kr; ++p) {
        const std::ptrdiff_t m = fi - static_cast<std::ptrdiff_t>(p);
        if (m < 0 || m >= static_cast<std::ptrdiff_t>(ar)) continue;
        for (std::size_t q = 0; q < kc; ++q) {
          const std::ptrdiff_t n = fj - static_cast<std::ptrdiff_t>(q);
          if (n < 0 || n >= static_cast<std::ptrdiff_t>(ac)) continue;
          acc += static_cast<double>(ad[a.offset(m, n)]) * static_cast<double>(kd[k.offset(p, q)]);
        }
      }
      out[i * out_c + j] = static_cast<float>(acc);
    }
  }
  return Matrix(out_r, out_c, std::move(out));
}

}  // namespace matcha

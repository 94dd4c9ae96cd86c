#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "matcha/matcha.hpp"

namespace support {

using matcha::Matrix;

// Triple loop in double over logical indices.
inline std::vector<double> naive_matmul(const Matrix& a, const Matrix& b) {
  std::vector<double> out(a.rows() * b.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += static_cast<double>(a.get(i, k)) * b.get(k, j);
      out[i * b.cols() + j] = s;
    }
  return out;
}

// Direct sum over the full convolution, cropped to the requested window.
inline std::vector<double> naive_convolve(const Matrix& a, const Matrix& k, bool same) {
  const long ar = static_cast<long>(a.rows()), ac = static_cast<long>(a.cols());
  const long kr = static_cast<long>(k.rows()), kc = static_cast<long>(k.cols());
  const long orows = same ? ar : ar - kr + 1, ocols = same ? ac : ac - kc + 1;
  const long r0 = same ? (kr - 1) / 2 : kr - 1, c0 = same ? (kc - 1) / 2 : kc - 1;
  std::vector<double> out(static_cast<std::size_t>(orows * ocols), 0.0);
  for (long i = 0; i < orows; ++i)
    for (long j = 0; j < ocols; ++j) {
      double s = 0.0;
      for (long u = 0; u < kr; ++u)
        for (long v = 0; v < kc; ++v) {
          const long x = i + r0 - u, y = j + c0 - v;
          if (x < 0 || y < 0 || x >= ar || y >= ac) continue;
          s += static_cast<double>(a.get(static_cast<std::size_t>(x), static_cast<std::size_t>(y))) *
               k.get(static_cast<std::size_t>(u), static_cast<std::size_t>(v));
        }
      out[static_cast<std::size_t>(i * ocols + j)] = s;
    }
  return out;
}

inline double rel_err(double got, double want) {
  return std::fabs(got - want) / std::max(1.0, std::fabs(want));
}

// Largest relative error of `m` (row-major) against `want`.
inline double max_rel_err(const Matrix& m, const std::vector<double>& want) {
  const auto v = m.to_vector();
  double worst = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) worst = std::max(worst, rel_err(v[k], want[k]));
  return worst;
}

inline bool bit_equal(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  const auto x = a.to_vector(), y = b.to_vector();
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (std::signbit(x[k]) != std::signbit(y[k])) return false;
    if (std::isnan(x[k]) ? !std::isnan(y[k]) : x[k] != y[k]) return false;
  }
  return true;
}

// Random matrix whose storage is column-major when `flipped`.
inline Matrix random_layout(std::size_t rows, std::size_t cols, std::uint64_t seed, bool flipped) {
  return flipped ? matcha::random(cols, rows, seed).t() : matcha::random(rows, cols, seed);
}

inline matcha::backend::ComputeContext cpu_context(matcha::backend::ContextOptions opts = {}) {
  return matcha::backend::init_context(matcha::backend::select_device(matcha::backend::enumerate_devices()), opts);
}

// Two Gaussian blobs in 2D, n per class, labels 0 and 1.
inline std::pair<Matrix, Matrix> two_blobs(std::uint64_t seed, std::size_t n, double sep = 3.0, double sd = 0.6) {
  matcha::SplitMix64 rng(seed);
  std::vector<float> x, y;
  for (int c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < n; ++i) {
      const double m = c == 0 ? -sep / 2 : sep / 2;
      x.push_back(static_cast<float>(m + sd * rng.normal()));
      x.push_back(static_cast<float>(m * 0.5 + sd * rng.normal()));
      y.push_back(static_cast<float>(c));
    }
  return {Matrix(2 * n, 2, std::move(x)), Matrix(2 * n, 1, std::move(y))};
}

}  // namespace support

namespace support {

// Minimal XML well-formedness check: balanced, properly nested elements,
// quoted attributes, one root. Returns an empty string when the document is
// well formed, else a description of the first problem.
inline std::string xml_problem(const std::string& doc) {
  std::vector<std::string> stack;
  std::size_t p = 0, roots = 0;
  while ((p = doc.find('<', p)) != std::string::npos) {
    if (doc.compare(p, 4, "<!--") == 0) {
      const auto e = doc.find("-->", p);
      if (e == std::string::npos) return "unterminated comment";
      p = e + 3;
      continue;
    }
    if (doc.compare(p, 2, "<?") == 0 || doc.compare(p, 2, "<!") == 0) {
      const auto e = doc.find('>', p);
      if (e == std::string::npos) return "unterminated declaration";
      p = e + 1;
      continue;
    }
    // Find the closing '>' outside quoted attribute values.
    std::size_t e = p + 1;
    char quote = 0;
    for (; e < doc.size(); ++e) {
      if (quote) {
        if (doc[e] == quote) quote = 0;
      } else if (doc[e] == '"' || doc[e] == '\'') {
        quote = doc[e];
      } else if (doc[e] == '>') {
        break;
      } else if (doc[e] == '<') {
        return "'<' inside a tag at byte " + std::to_string(e);
      }
    }
    if (e >= doc.size()) return "unterminated tag at byte " + std::to_string(p);
    const std::string tag = doc.substr(p + 1, e - p - 1);
    if (tag.empty()) return "empty tag";
    if (tag[0] == '/') {
      const std::string name = tag.substr(1);
      if (stack.empty() || stack.back() != name) return "mismatched </" + name + ">";
      stack.pop_back();
    } else {
      const std::string name = tag.substr(0, tag.find_first_of(" \t\n/"));
      if (stack.empty()) ++roots;
      if (tag.back() != '/') stack.push_back(name);
    }
    p = e + 1;
  }
  if (!stack.empty()) return "unclosed <" + stack.back() + ">";
  if (roots != 1) return "expected one root element, found " + std::to_string(roots);
  return {};
}

inline std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + needle.size())) ++n;
  return n;
}

}  // namespace support

namespace support {

struct Rng {
  explicit Rng(std::uint64_t seed) : g(seed) {}
  double uniform(double lo, double hi) { return lo + (hi - lo) * g.uniform_double(); }
  std::uint64_t below(std::uint64_t n) { return g.below(n); }
  double normal() { return g.normal(); }
  matcha::SplitMix64 g;
};

}  // namespace support

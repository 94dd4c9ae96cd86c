#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "matcha/ml/common.hpp"

namespace matcha::ml {

inline constexpr double kCcaRidge = 1e-6;

// Canonical correlation analysis. With Cxx = Lx Lx^T and Cyy = Ly Ly^T
// (ridged), the canonical pairs come from the symmetric eigenproblem of
// M M^T where M = Lx^-1 Cxy Ly^-T:
//   Wx = Lx^-T u,  Wy = Ly^-T M^T u / rho,  rho = sqrt(eigenvalue).
class CCA {
 public:
  explicit CCA(std::size_t n_components = 1) : m_(n_components) {
    if (n_components == 0) throw ParameterError("n_components must be at least 1");
  }

  CCA& fit(const Matrix& x, const Matrix& y) {
    detail::require_samples(x);
    detail::require_samples(y);
    if (x.rows() != y.rows()) throw ShapeError("X and Y must have the same number of rows");
    const std::size_t n = x.rows(), dx = x.cols(), dy = y.cols();
    if (m_ > std::min(dx, dy)) {
      throw ParameterError("n_components=" + std::to_string(m_) + " exceeds min(" + std::to_string(dx) + ", " +
                           std::to_string(dy) + ")");
    }
    if (n <= std::max(dx, dy)) {
      throw RankError("CCA needs more samples than features: n=" + std::to_string(n) + ", dx=" + std::to_string(dx) +
                      ", dy=" + std::to_string(dy));
    }
    std::vector<double> mx, my;
    auto xc = centered(x, mx), yc = centered(y, my);
    auto xt = linalg::transpose(xc), yt = linalg::transpose(yc);
    auto cxx = linalg::multiply(xt, xc), cyy = linalg::multiply(yt, yc), cxy = linalg::multiply(xt, yc);
    const double denom = static_cast<double>(n - 1);
    for (auto* c : {&cxx, &cyy, &cxy})
      for (auto& v : c->v) v /= denom;
    for (std::size_t j = 0; j < dx; ++j) cxx(j, j) += kCcaRidge;
    for (std::size_t j = 0; j < dy; ++j) cyy(j, j) += kCcaRidge;
    const auto lx = linalg::cholesky(cxx), ly = linalg::cholesky(cyy);
    if (!lx || !ly) throw RankError("auto-covariance is not positive definite");

    // M = Lx^-1 Cxy Ly^-T
    const auto a = linalg::forward_substitute(*lx, cxy);                              // dx x dy
    const auto mt = linalg::forward_substitute(*ly, linalg::transpose(a));            // dy x dx = M^T
    const auto mm = linalg::transpose(mt);
    const auto eig = linalg::jacobi_eigen(linalg::multiply(mm, mt));
    const auto eig_y = linalg::jacobi_eigen(linalg::multiply(mt, mm));

    linalg::Dense u(dx, m_), v(dy, m_);
    correlations_.assign(m_, 0.0);
    for (std::size_t k = 0; k < m_; ++k) {
      const double rho = std::sqrt(std::clamp(eig.values[k], 0.0, 1.0));
      correlations_[k] = rho;
      for (std::size_t j = 0; j < dx; ++j) u(j, k) = eig.vectors(j, k);
      double norm = 0.0;
      std::vector<double> vk(dy, 0.0);
      for (std::size_t r = 0; r < dy; ++r) {
        for (std::size_t j = 0; j < dx; ++j) vk[r] += mt(r, j) * u(j, k);
        norm += vk[r] * vk[r];
      }
      norm = std::sqrt(norm);
      for (std::size_t r = 0; r < dy; ++r) v(r, k) = norm > 1e-12 ? vk[r] / norm : eig_y.vectors(r, k);
    }
    wx_ = linalg::to_matrix(linalg::backward_substitute_transposed(*lx, u));
    wy_ = linalg::to_matrix(linalg::backward_substitute_transposed(*ly, v));
    mean_x_ = row(mx);
    mean_y_ = row(my);
    fitted_ = true;
    return *this;
  }

  // Canonical variates ((X - mx) Wx, (Y - my) Wy).
  std::pair<Matrix, Matrix> transform(const Matrix& x, const Matrix& y) const {
    detail::require_fitted(fitted_, "CCA");
    detail::require_features(x, wx_.rows());
    detail::require_features(y, wy_.rows());
    return {project(x, mean_x_, wx_), project(y, mean_y_, wy_)};
  }

  bool fitted() const noexcept { return fitted_; }
  std::size_t n_components() const noexcept { return m_; }
  const Matrix& x_weights() const noexcept { return wx_; }
  const Matrix& y_weights() const noexcept { return wy_; }
  // Canonical correlations in [0,1], non-increasing.
  const std::vector<double>& correlations() const noexcept { return correlations_; }

  json to_json() const {
    detail::require_fitted(fitted_, "CCA");
    return json{{"type", "cca"},
                {"params", {{"n_components", m_}}},
                {"state",
                 {{"wx", detail::matrix_to_json(wx_)},
                  {"wy", detail::matrix_to_json(wy_)},
                  {"mean_x", detail::matrix_to_json(mean_x_)},
                  {"mean_y", detail::matrix_to_json(mean_y_)},
                  {"correlations", correlations_}}}};
  }

  static CCA from_json(const json& j) {
    detail::expect_type(j, "cca");
    CCA c(j.at("params").at("n_components").get<std::size_t>());
    const auto& s = j.at("state");
    c.wx_ = detail::matrix_from_json(s.at("wx"));
    c.wy_ = detail::matrix_from_json(s.at("wy"));
    c.mean_x_ = detail::matrix_from_json(s.at("mean_x"));
    c.mean_y_ = detail::matrix_from_json(s.at("mean_y"));
    c.correlations_ = s.at("correlations").get<std::vector<double>>();
    c.fitted_ = true;
    return c;
  }

 private:
  static linalg::Dense centered(const Matrix& m, std::vector<double>& mean) {
    auto d = linalg::to_dense(m);
    mean.assign(d.cols, 0.0);
    for (std::size_t i = 0; i < d.rows; ++i)
      for (std::size_t j = 0; j < d.cols; ++j) mean[j] += d(i, j);
    for (auto& v : mean) v /= static_cast<double>(d.rows);
    for (std::size_t i = 0; i < d.rows; ++i)
      for (std::size_t j = 0; j < d.cols; ++j) d(i, j) -= mean[j];
    return d;
  }

  static Matrix row(const std::vector<double>& v) {
    std::vector<float> f(v.begin(), v.end());
    return Matrix(1, v.size(), std::move(f));
  }

  static Matrix project(const Matrix& x, const Matrix& mean, const Matrix& w) {
    const auto m = mean.to_vector();
    auto v = x.to_vector();
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) v[i * x.cols() + j] -= m[j];
    return matmul(Matrix(x.rows(), x.cols(), std::move(v)), w);
  }

  std::size_t m_;
  Matrix wx_, wy_, mean_x_, mean_y_;
  std::vector<double> correlations_;
  bool fitted_ = false;
};

}  // namespace matcha::ml

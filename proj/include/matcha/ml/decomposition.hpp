#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "matcha/ml/common.hpp"

namespace matcha::ml {

// Principal components from the eigendecomposition of the sample covariance
// (n - 1 denominator). Components are the columns of a d x m matrix.
class PCA {
 public:
  explicit PCA(std::size_t n_components) : m_(n_components) {
    if (n_components == 0) throw ParameterError("n_components must be at least 1");
  }

  PCA& fit(const Matrix& x) {
    detail::require_samples(x);
    const std::size_t n = x.rows(), d = x.cols();
    if (m_ > d) throw ParameterError("n_components=" + std::to_string(m_) + " exceeds " + std::to_string(d) + " features");
    auto c = linalg::to_dense(x);
    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) mean[j] += c(i, j);
    for (auto& v : mean) v /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) c(i, j) -= mean[j];
    auto cov = linalg::multiply(linalg::transpose(c), c);
    const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
    for (auto& v : cov.v) v /= denom;
    const auto eig = linalg::jacobi_eigen(cov);

    linalg::Dense comp(d, m_);
    explained_variance_.assign(m_, 0.0);
    for (std::size_t k = 0; k < m_; ++k) {
      explained_variance_[k] = eig.values[k];
      for (std::size_t j = 0; j < d; ++j) comp(j, k) = eig.vectors(j, k);
    }
    total_variance_ = 0.0;
    for (double v : eig.values) total_variance_ += v;
    components_ = linalg::to_matrix(comp);
    std::vector<float> mf(mean.begin(), mean.end());
    mean_ = Matrix(1, d, std::move(mf));
    fitted_ = true;
    return *this;
  }

  // (X - mean) W, n x m.
  Matrix transform(const Matrix& x) const {
    detail::require_fitted(fitted_, "PCA");
    detail::require_features(x, components_.rows());
    return matmul(sub(x, broadcast_mean(x.rows())), components_);
  }

  // Z W^T + mean, n x d.
  Matrix inverse_transform(const Matrix& z) const {
    detail::require_fitted(fitted_, "PCA");
    if (z.cols() != m_) throw ShapeError("expected " + std::to_string(m_) + " components, got " + shape_string(z));
    return add(matmul(z, components_.t()), broadcast_mean(z.rows()));
  }

  bool fitted() const noexcept { return fitted_; }
  std::size_t n_components() const noexcept { return m_; }
  const Matrix& components() const noexcept { return components_; }
  const Matrix& mean() const noexcept { return mean_; }
  const std::vector<double>& explained_variance() const noexcept { return explained_variance_; }
  std::vector<double> explained_variance_ratio() const {
    std::vector<double> r = explained_variance_;
    for (auto& v : r) v = total_variance_ > 0.0 ? v / total_variance_ : 0.0;
    return r;
  }

  json to_json() const {
    detail::require_fitted(fitted_, "PCA");
    return json{{"type", "pca"},
                {"params", {{"n_components", m_}}},
                {"state",
                 {{"components", detail::matrix_to_json(components_)},
                  {"mean", detail::matrix_to_json(mean_)},
                  {"explained_variance", explained_variance_},
                  {"total_variance", total_variance_}}}};
  }

  static PCA from_json(const json& j) {
    detail::expect_type(j, "pca");
    PCA p(j.at("params").at("n_components").get<std::size_t>());
    const auto& s = j.at("state");
    p.components_ = detail::matrix_from_json(s.at("components"));
    p.mean_ = detail::matrix_from_json(s.at("mean"));
    p.explained_variance_ = s.at("explained_variance").get<std::vector<double>>();
    p.total_variance_ = s.at("total_variance").get<double>();
    p.fitted_ = true;
    return p;
  }

 private:
  Matrix broadcast_mean(std::size_t rows) const {
    const auto m = mean_.to_vector();
    std::vector<float> out(rows * m.size());
    for (std::size_t i = 0; i < rows; ++i) std::copy(m.begin(), m.end(), out.begin() + static_cast<std::ptrdiff_t>(i * m.size()));
    return Matrix(rows, m.size(), std::move(out));
  }

  std::size_t m_;
  Matrix components_, mean_;
  std::vector<double> explained_variance_;
  double total_variance_ = 0.0;
  bool fitted_ = false;
};

}  // namespace matcha::ml

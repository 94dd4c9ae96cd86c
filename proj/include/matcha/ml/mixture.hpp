#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "matcha/ml/cluster.hpp"
#include "matcha/ml/common.hpp"

namespace matcha::ml {

inline constexpr double kCovarianceFloor = 1e-6;

// Gaussian mixture with full covariances fitted by EM. Means start at the
// k-means centroids, every covariance at the pooled sample covariance, and
// the weights uniform. A covariance whose smallest eigenvalue falls below
// the floor gets a ridge lifting it back to the floor.
class GaussianMixture {
 public:
  explicit GaussianMixture(std::size_t n_components = 2, std::size_t max_iter = 100, double tol = 1e-7,
                           std::uint64_t seed = 0)
      : k_(n_components), max_iter_(max_iter), tol_(tol), seed_(seed) {
    if (n_components == 0) throw ParameterError("n_components must be at least 1");
    if (max_iter == 0) throw ParameterError("max_iter must be at least 1");
    if (!(tol > 0.0)) throw ParameterError("tol must be positive");
  }

  GaussianMixture& fit(const Matrix& x) {
    detail::require_samples(x);
    const std::size_t n = x.rows(), d = x.cols();
    if (n < k_) {
      throw ParameterError("n_components=" + std::to_string(k_) + " exceeds the " + std::to_string(n) + " samples");
    }
    const auto data = linalg::to_dense(x);

    KMeans init(k_, 100, 1e-6, seed_);
    init.fit(x);
    std::vector<Component> comps(k_);
    const auto centroids = linalg::to_dense(init.centroids());
    std::vector<double> weights(k_, 1.0 / static_cast<double>(k_));
    std::vector<double> all(n, 1.0);
    const auto pooled_mean = weighted_mean(data, all);
    const auto pooled_cov = weighted_covariance(data, all, pooled_mean);
    for (std::size_t m = 0; m < k_; ++m) {
      comps[m].mean.assign(centroids.v.begin() + static_cast<std::ptrdiff_t>(m * d),
                           centroids.v.begin() + static_cast<std::ptrdiff_t>((m + 1) * d));
      comps[m].set_covariance(pooled_cov);
    }

    ll_history_.clear();
    iterations_ = 0;
    linalg::Dense resp(n, k_);
    std::vector<double> logp(k_);
    for (;;) {
      // E-step: log responsibilities and the mean log-likelihood.
      double ll = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t m = 0; m < k_; ++m) logp[m] = std::log(weights[m]) + comps[m].log_pdf(&data.v[i * d]);
        const double lse = detail::log_sum_exp(logp.data(), k_);
        ll += lse;
        for (std::size_t m = 0; m < k_; ++m) resp(i, m) = std::exp(logp[m] - lse);
      }
      ll /= static_cast<double>(n);
      const bool converged = !ll_history_.empty() && ll - ll_history_.back() < tol_;
      ll_history_.push_back(ll);
      if (converged || iterations_ == max_iter_) break;
      ++iterations_;

      // M-step.
      std::vector<double> r(n);
      for (std::size_t m = 0; m < k_; ++m) {
        double nk = 0.0;
        for (std::size_t i = 0; i < n; ++i) nk += (r[i] = resp(i, m));
        if (nk <= 0.0) continue;
        weights[m] = nk / static_cast<double>(n);
        comps[m].mean = weighted_mean(data, r);
        comps[m].set_covariance(weighted_covariance(data, r, comps[m].mean));
      }
      double total = 0.0;
      for (double w : weights) total += w;
      for (double& w : weights) w /= total;
    }

    // Publish float parameters and derive the scoring caches from them, so a
    // reloaded model scores bit-identically.
    covariances_.clear();
    weights_.assign(k_, 0.0f);
    std::vector<float> mv(k_ * d);
    for (std::size_t m = 0; m < k_; ++m) {
      for (std::size_t j = 0; j < d; ++j) mv[m * d + j] = static_cast<float>(comps[m].mean[j]);
      covariances_.push_back(linalg::to_matrix(comps[m].cov));
      weights_[m] = static_cast<float>(weights[m]);
    }
    means_ = Matrix(k_, d, std::move(mv));
    build_cache();
    fitted_ = true;
    return *this;
  }

  // log p(x) for one sample given as 1 x d or d x 1.
  double score(const Matrix& x) const {
    detail::require_fitted(fitted_, "GaussianMixture");
    const std::size_t d = means_.cols();
    if (x.size() != d || (x.rows() != 1 && x.cols() != 1)) {
      throw ShapeError("score expects one sample with " + std::to_string(d) + " features, got " + shape_string(x));
    }
    const auto v = x.to_vector();
    std::vector<double> p(v.begin(), v.end());
    return log_density(p.data());
  }

  // log p(x_i) per row, n x 1.
  Matrix score_samples(const Matrix& x) const {
    detail::require_fitted(fitted_, "GaussianMixture");
    detail::require_features(x, means_.cols());
    const auto data = linalg::to_dense(x);
    std::vector<float> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = static_cast<float>(log_density(&data.v[i * data.cols]));
    return Matrix(x.rows(), 1, std::move(out));
  }

  // Most responsible component per row.
  Matrix predict(const Matrix& x) const {
    detail::require_fitted(fitted_, "GaussianMixture");
    detail::require_features(x, means_.cols());
    const auto data = linalg::to_dense(x);
    std::vector<float> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      std::size_t arg = 0;
      double best = -INFINITY;
      for (std::size_t m = 0; m < k_; ++m) {
        const double lp = log_weights_[m] + cache_[m].log_pdf(&data.v[i * data.cols]);
        if (lp > best) {
          best = lp;
          arg = m;
        }
      }
      out[i] = static_cast<float>(arg);
    }
    return Matrix(x.rows(), 1, std::move(out));
  }

  bool fitted() const noexcept { return fitted_; }
  std::size_t n_components() const noexcept { return k_; }
  std::size_t max_iter() const noexcept { return max_iter_; }
  double tol() const noexcept { return tol_; }
  const Matrix& means() const noexcept { return means_; }
  const std::vector<Matrix>& covariances() const noexcept { return covariances_; }
  const std::vector<float>& weights() const noexcept { return weights_; }
  std::size_t iterations() const noexcept { return iterations_; }
  // Mean log-likelihood per sample at each E-step.
  const std::vector<double>& log_likelihood_history() const noexcept { return ll_history_; }

  json to_json() const {
    detail::require_fitted(fitted_, "GaussianMixture");
    json covs = json::array();
    for (const auto& c : covariances_) covs.push_back(detail::matrix_to_json(c));
    json w = json::array();
    for (float v : weights_) w.push_back(static_cast<double>(v));
    return json{{"type", "gmm"},
                {"params", {{"n_components", k_}, {"max_iter", max_iter_}, {"tol", tol_}, {"seed", seed_}}},
                {"state", {{"means", detail::matrix_to_json(means_)}, {"covariances", covs}, {"weights", w}}}};
  }

  static GaussianMixture from_json(const json& j) {
    detail::expect_type(j, "gmm");
    const auto& p = j.at("params");
    GaussianMixture g(p.at("n_components").get<std::size_t>(), p.at("max_iter").get<std::size_t>(),
                      p.at("tol").get<double>(), p.at("seed").get<std::uint64_t>());
    const auto& s = j.at("state");
    g.means_ = detail::matrix_from_json(s.at("means"));
    for (const auto& c : s.at("covariances")) g.covariances_.push_back(detail::matrix_from_json(c));
    for (const auto& w : s.at("weights")) g.weights_.push_back(static_cast<float>(w.get<double>()));
    if (g.means_.rows() != g.k_ || g.covariances_.size() != g.k_ || g.weights_.size() != g.k_) {
      throw ParseError("gmm document has inconsistent component counts", 0);
    }
    g.build_cache();
    g.fitted_ = true;
    return g;
  }

 private:
  struct Component {
    std::vector<double> mean;
    linalg::Dense cov;
    linalg::Dense chol;
    double log_norm = 0.0;  // -(d log 2pi + log|cov|) / 2

    void set_covariance(linalg::Dense c) {
      const std::size_t d = c.rows;
      const auto eig = linalg::jacobi_eigen(c);
      const double lo = eig.values.back();
      if (lo < kCovarianceFloor) {
        const double ridge = kCovarianceFloor + std::max(0.0, -lo);
        for (std::size_t j = 0; j < d; ++j) c(j, j) += ridge;
      }
      auto l = linalg::cholesky(c);
      if (!l) {
        for (std::size_t j = 0; j < d; ++j) c(j, j) += kCovarianceFloor;
        l = linalg::cholesky(c);
        if (!l) throw SingularMatrixError("mixture covariance is not positive definite");
      }
      cov = std::move(c);
      chol = std::move(*l);
      double logdet = 0.0;
      for (std::size_t j = 0; j < d; ++j) logdet += 2.0 * std::log(chol(j, j));
      log_norm = -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + logdet);
    }

    double log_pdf(const double* x) const {
      const std::size_t d = mean.size();
      double q = 0.0;
      std::vector<double> z(d);
      for (std::size_t i = 0; i < d; ++i) {
        double s = x[i] - mean[i];
        for (std::size_t k = 0; k < i; ++k) s -= chol(i, k) * z[k];
        z[i] = s / chol(i, i);
        q += z[i] * z[i];
      }
      return log_norm - 0.5 * q;
    }
  };

  static std::vector<double> weighted_mean(const linalg::Dense& x, const std::vector<double>& r) {
    std::vector<double> m(x.cols, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
      total += r[i];
      for (std::size_t j = 0; j < x.cols; ++j) m[j] += r[i] * x(i, j);
    }
    for (double& v : m) v /= total;
    return m;
  }

  static linalg::Dense weighted_covariance(const linalg::Dense& x, const std::vector<double>& r,
                                           const std::vector<double>& mean) {
    const std::size_t d = x.cols;
    linalg::Dense c(d, d);
    double total = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
      total += r[i];
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a; b < d; ++b) c(a, b) += r[i] * (x(i, a) - mean[a]) * (x(i, b) - mean[b]);
    }
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) c(b, a) = c(a, b) = c(a, b) / total;
    return c;
  }

  void build_cache() {
    const std::size_t d = means_.cols();
    const auto mv = means_.to_vector();
    cache_.assign(k_, {});
    log_weights_.assign(k_, 0.0);
    for (std::size_t m = 0; m < k_; ++m) {
      cache_[m].mean.assign(mv.begin() + static_cast<std::ptrdiff_t>(m * d),
                            mv.begin() + static_cast<std::ptrdiff_t>((m + 1) * d));
      auto c = linalg::to_dense(covariances_[m]);
      auto l = linalg::cholesky(c);
      if (!l) throw SingularMatrixError("mixture covariance is not positive definite");
      double logdet = 0.0;
      for (std::size_t j = 0; j < d; ++j) logdet += 2.0 * std::log((*l)(j, j));
      cache_[m].cov = std::move(c);
      cache_[m].chol = std::move(*l);
      cache_[m].log_norm = -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + logdet);
      log_weights_[m] = std::log(static_cast<double>(weights_[m]));
    }
  }

  double log_density(const double* x) const {
    std::vector<double> lp(k_);
    for (std::size_t m = 0; m < k_; ++m) lp[m] = log_weights_[m] + cache_[m].log_pdf(x);
    return detail::log_sum_exp(lp.data(), k_);
  }

  std::size_t k_;
  std::size_t max_iter_;
  double tol_;
  std::uint64_t seed_;
  Matrix means_;
  std::vector<Matrix> covariances_;
  std::vector<float> weights_;
  std::vector<Component> cache_;
  std::vector<double> log_weights_;
  std::vector<double> ll_history_;
  std::size_t iterations_ = 0;
  bool fitted_ = false;
};

}  // namespace matcha::ml

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "matcha/ml/common.hpp"
#include "matcha/ml/stats.hpp"
#include "matcha/rng.hpp"

namespace matcha::ml {

// Lloyd's algorithm. Centroids start at k distinct samples drawn under the
// seed; a cluster that loses all its points is moved to the sample farthest
// from its current centroid.
class KMeans {
 public:
  explicit KMeans(std::size_t k, std::size_t max_iter = 300, double tol = 1e-4, std::uint64_t seed = 0)
      : k_(k), max_iter_(max_iter), tol_(tol), seed_(seed) {
    if (k == 0) throw ParameterError("k must be at least 1");
    if (max_iter == 0) throw ParameterError("max_iter must be at least 1");
    if (!(tol >= 0.0)) throw ParameterError("tol must be non-negative");
  }

  KMeans& fit(const Matrix& x) {
    detail::require_samples(x);
    const std::size_t n = x.rows(), d = x.cols();
    if (k_ > n) throw ParameterError("k=" + std::to_string(k_) + " exceeds the " + std::to_string(n) + " samples");
    const auto data = linalg::to_dense(x);
    SplitMix64 rng(seed_);
    const auto perm = stats::permutation(n, rng);
    linalg::Dense c(k_, d);
    for (std::size_t m = 0; m < k_; ++m)
      for (std::size_t j = 0; j < d; ++j) c(m, j) = data(perm[m], j);

    std::vector<std::size_t> assign(n, 0);
    std::vector<double> best(n);
    inertia_history_.clear();
    iterations_ = 0;
    for (;;) {
      double inertia = assign_points(data, c, assign, best);
      inertia_history_.push_back(inertia);
      if (iterations_ == max_iter_) break;
      ++iterations_;

      linalg::Dense next(k_, d);
      std::vector<std::size_t> counts(k_, 0);
      for (std::size_t i = 0; i < n; ++i) {
        ++counts[assign[i]];
        for (std::size_t j = 0; j < d; ++j) next(assign[i], j) += data(i, j);
      }
      std::vector<bool> taken(n, false);
      for (std::size_t m = 0; m < k_; ++m) {
        if (counts[m] > 0) {
          for (std::size_t j = 0; j < d; ++j) next(m, j) /= static_cast<double>(counts[m]);
          continue;
        }
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (!taken[i] && best[i] > far_d) {
            far_d = best[i];
            far = i;
          }
        }
        taken[far] = true;
        for (std::size_t j = 0; j < d; ++j) next(m, j) = data(far, j);
      }
      double shift = 0.0;
      for (std::size_t m = 0; m < k_; ++m)
        shift = std::max(shift, std::sqrt(detail::squared_distance(&c.v[m * d], &next.v[m * d], d)));
      c = std::move(next);
      if (shift <= tol_) {
        inertia_history_.push_back(assign_points(data, c, assign, best));
        break;
      }
    }
    centroids_ = linalg::to_matrix(c);
    centroids_d_ = linalg::to_dense(centroids_);
    std::vector<float> a(assign.begin(), assign.end());
    assignments_ = Matrix(n, 1, std::move(a));
    inertia_ = inertia_history_.back();
    fitted_ = true;
    return *this;
  }

  // Index of the nearest centroid per row.
  Matrix predict(const Matrix& x) const {
    detail::require_fitted(fitted_, "KMeans");
    detail::require_features(x, centroids_.cols());
    const auto data = linalg::to_dense(x);
    std::vector<std::size_t> assign(x.rows());
    std::vector<double> best(x.rows());
    assign_points(data, centroids_d_, assign, best);
    std::vector<float> out(assign.begin(), assign.end());
    return Matrix(x.rows(), 1, std::move(out));
  }

  bool fitted() const noexcept { return fitted_; }
  std::size_t k() const noexcept { return k_; }
  const Matrix& centroids() const noexcept { return centroids_; }
  const Matrix& assignments() const noexcept { return assignments_; }
  double inertia() const noexcept { return inertia_; }
  std::size_t iterations() const noexcept { return iterations_; }
  // Inertia after each assignment step, starting from the initial centroids.
  const std::vector<double>& inertia_history() const noexcept { return inertia_history_; }

  json to_json() const {
    detail::require_fitted(fitted_, "KMeans");
    return json{{"type", "kmeans"},
                {"params", {{"k", k_}, {"max_iter", max_iter_}, {"tol", tol_}, {"seed", seed_}}},
                {"state",
                 {{"centroids", detail::matrix_to_json(centroids_)},
                  {"assignments", detail::matrix_to_json(assignments_)},
                  {"inertia", inertia_}}}};
  }

  static KMeans from_json(const json& j) {
    detail::expect_type(j, "kmeans");
    const auto& p = j.at("params");
    KMeans m(p.at("k").get<std::size_t>(), p.at("max_iter").get<std::size_t>(), p.at("tol").get<double>(),
             p.at("seed").get<std::uint64_t>());
    const auto& s = j.at("state");
    m.centroids_ = detail::matrix_from_json(s.at("centroids"));
    m.centroids_d_ = linalg::to_dense(m.centroids_);
    m.assignments_ = detail::matrix_from_json(s.at("assignments"));
    m.inertia_ = s.at("inertia").get<double>();
    m.fitted_ = true;
    return m;
  }

 private:
  double assign_points(const linalg::Dense& data, const linalg::Dense& c, std::vector<std::size_t>& assign,
                       std::vector<double>& best) const {
    const std::size_t d = data.cols;
    double inertia = 0.0;
    for (std::size_t i = 0; i < data.rows; ++i) {
      double b = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t m = 0; m < c.rows; ++m) {
        const double s = detail::squared_distance(&data.v[i * d], &c.v[m * d], d);
        if (s < b) {
          b = s;
          arg = m;
        }
      }
      assign[i] = arg;
      best[i] = b;
      inertia += b;
    }
    return inertia;
  }

  std::size_t k_;
  std::size_t max_iter_;
  double tol_;
  std::uint64_t seed_;
  Matrix centroids_, assignments_;
  linalg::Dense centroids_d_;
  double inertia_ = 0.0;
  std::size_t iterations_ = 0;
  std::vector<double> inertia_history_;
  bool fitted_ = false;
};

}  // namespace matcha::ml

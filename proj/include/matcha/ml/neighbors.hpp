#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "matcha/ml/common.hpp"

namespace matcha::ml {

// Majority vote among the k nearest training samples (Euclidean). Ties go to
// the smallest class value.
class KNeighborsClassifier {
 public:
  explicit KNeighborsClassifier(std::size_t n_neighbors = 5) : k_(n_neighbors) {
    if (n_neighbors == 0) throw ParameterError("n_neighbors must be at least 1");
  }

  KNeighborsClassifier& fit(const Matrix& x, const Matrix& y) {
    detail::require_targets(x, y);
    if (k_ > x.rows()) {
      throw ParameterError("n_neighbors=" + std::to_string(k_) + " exceeds the " + std::to_string(x.rows()) +
                           " training samples");
    }
    const auto labels = y.to_vector();
    for (float l : labels)
      if (!std::isfinite(l) || l != std::floor(l)) throw LabelError("class labels must be integers");
    samples_ = x;
    labels_ = y;
    train_ = linalg::to_dense(x);
    train_labels_ = labels;
    fitted_ = true;
    return *this;
  }

  Matrix predict(const Matrix& x) const {
    detail::require_fitted(fitted_, "KNeighborsClassifier");
    detail::require_features(x, train_.cols);
    const auto q = linalg::to_dense(x);
    const std::size_t n = train_.rows, d = train_.cols;
    std::vector<std::pair<double, std::size_t>> dist(n);
    std::vector<float> out(q.rows);
    for (std::size_t r = 0; r < q.rows; ++r) {
      for (std::size_t i = 0; i < n; ++i) dist[i] = {detail::squared_distance(&q.v[r * d], &train_.v[i * d], d), i};
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_), dist.end());
      std::map<float, std::size_t> votes;
      for (std::size_t m = 0; m < k_; ++m) ++votes[train_labels_[dist[m].second]];
      float best = 0.0f;
      std::size_t best_count = 0;
      for (const auto& [label, count] : votes) {
        if (count > best_count) {
          best = label;
          best_count = count;
        }
      }
      out[r] = best;
    }
    return Matrix(q.rows, 1, std::move(out));
  }

  bool fitted() const noexcept { return fitted_; }
  std::size_t n_neighbors() const noexcept { return k_; }

  json to_json() const {
    detail::require_fitted(fitted_, "KNeighborsClassifier");
    return json{{"type", "knn"},
                {"params", {{"n_neighbors", k_}}},
                {"state", {{"samples", detail::matrix_to_json(samples_)}, {"labels", detail::matrix_to_json(labels_)}}}};
  }

  static KNeighborsClassifier from_json(const json& j) {
    detail::expect_type(j, "knn");
    KNeighborsClassifier m(j.at("params").at("n_neighbors").get<std::size_t>());
    const auto& s = j.at("state");
    m.fit(detail::matrix_from_json(s.at("samples")), detail::matrix_from_json(s.at("labels")));
    return m;
  }

 private:
  std::size_t k_;
  Matrix samples_, labels_;
  linalg::Dense train_;
  std::vector<float> train_labels_;
  bool fitted_ = false;
};

}  // namespace matcha::ml

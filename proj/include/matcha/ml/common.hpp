#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "matcha/error.hpp"
#include "matcha/linalg.hpp"
#include "matcha/matrix.hpp"
#include "matcha/ops.hpp"

namespace matcha::ml {

using json = nlohmann::json;

// Paired samples (n x d) and labels or targets (n x 1).
struct Dataset {
  Matrix samples;
  Matrix labels;

  Dataset(Matrix x, Matrix y) : samples(std::move(x)), labels(std::move(y)) {
    if (samples.empty() || labels.empty()) throw DimensionError("dataset needs at least one sample");
    if (labels.cols() != 1) throw ShapeError("labels must be a column, got " + shape_string(labels));
    if (samples.rows() != labels.rows()) {
      throw ShapeError("dataset has " + std::to_string(samples.rows()) + " samples but " +
                       std::to_string(labels.rows()) + " labels");
    }
  }

  std::size_t size() const noexcept { return samples.rows(); }
  std::size_t features() const noexcept { return samples.cols(); }
};

namespace detail {

inline void require_fitted(bool fitted, const char* estimator) {
  if (!fitted) throw NotFittedError(std::string(estimator) + " is not fitted; call fit() first");
}

inline void require_samples(const Matrix& x) {
  if (x.empty()) throw DimensionError("no samples");
}

inline void require_targets(const Matrix& x, const Matrix& y) {
  require_samples(x);
  if (y.empty() || y.cols() != 1) throw ShapeError("targets must be an n x 1 column");
  if (y.rows() != x.rows()) {
    throw ShapeError(std::to_string(x.rows()) + " samples but " + std::to_string(y.rows()) + " targets");
  }
}

inline void require_features(const Matrix& x, std::size_t d) {
  require_samples(x);
  if (x.cols() != d) {
    throw ShapeError("expected " + std::to_string(d) + " features, got " + std::to_string(x.cols()));
  }
}

inline std::vector<double> column(const Matrix& y) {
  const auto v = y.to_vector();
  return {v.begin(), v.end()};
}

inline double squared_distance(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double t = a[j] - b[j];
    s += t * t;
  }
  return s;
}

inline double log_sum_exp(const double* v, std::size_t n) {
  double m = -INFINITY;
  for (std::size_t k = 0; k < n; ++k) m = std::max(m, v[k]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += std::exp(v[k] - m);
  return m + std::log(s);
}

// Matrices inside model documents use the core layout with numbers held as
// doubles, which is exact for float values.
inline json matrix_to_json(const Matrix& m) {
  const auto v = m.to_vector();
  json data = json::array();
  for (float f : v) data.push_back(static_cast<double>(f));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Matrix matrix_from_json(const json& j) {
  try {
    const auto rows = j.at("rows").get<std::size_t>();
    const auto cols = j.at("cols").get<std::size_t>();
    std::vector<float> data;
    for (const auto& x : j.at("data")) data.push_back(static_cast<float>(x.get<double>()));
    return Matrix(rows, cols, std::move(data));
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad matrix in model document: ") + e.what(), 0);
  }
}

inline void expect_type(const json& j, const char* tag) {
  if (!j.contains("type") || j["type"] != tag) {
    throw ParseError(std::string("model document is not of type '") + tag + "'", 0);
  }
}

}  // namespace detail

// Parses a model document produced by to_json() of estimator type T.
template <typename T>
T load_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed model JSON: ") + e.what(), e.byte);
  }
  try {
    return T::from_json(j);
  } catch (const json::exception& e) {
    throw ParseError(std::string("incomplete model document: ") + e.what(), 0);
  }
}

template <typename T>
std::string save_model(const T& model) {
  return model.to_json().dump();
}

}  // namespace matcha::ml

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "matcha/ml/common.hpp"
#include "matcha/ml/stats.hpp"
#include "matcha/rng.hpp"

namespace matcha::ml {

// Weights and intercept shared by every linear model.
struct LinearModelState {
  Matrix weights;  // d x 1
  float bias = 0.0f;
};

namespace detail {

struct Centered {
  linalg::Dense x;  // n x d, column means removed
  std::vector<double> y;
  std::vector<double> x_mean;
  double y_mean = 0.0;
};

inline Centered center(const Matrix& xm, const Matrix& ym) {
  Centered c;
  c.x = linalg::to_dense(xm);
  c.y = column(ym);
  const std::size_t n = c.x.rows, d = c.x.cols;
  c.x_mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) c.x_mean[j] += c.x(i, j);
  for (auto& m : c.x_mean) m /= static_cast<double>(n);
  for (double v : c.y) c.y_mean += v;
  c.y_mean /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) c.x(i, j) -= c.x_mean[j];
    c.y[i] -= c.y_mean;
  }
  return c;
}

// X w + b through the core matmul, so large batches use the installed backend.
inline Matrix linear_scores(const LinearModelState& s, const Matrix& x) {
  require_features(x, s.weights.rows());
  auto v = matmul(x, s.weights).to_vector();
  for (auto& z : v) z += s.bias;
  return Matrix(x.rows(), 1, std::move(v));
}

inline Matrix column_from(const std::vector<double>& v) {
  std::vector<float> f(v.begin(), v.end());
  return Matrix(v.size(), 1, std::move(f));
}

inline json state_to_json(const LinearModelState& s) {
  return json{{"weights", matrix_to_json(s.weights)}, {"bias", static_cast<double>(s.bias)}};
}

inline LinearModelState state_from_json(const json& j) {
  return {matrix_from_json(j.at("weights")), static_cast<float>(j.at("bias").get<double>())};
}

}  // namespace detail

enum class LinearKind { ols, ridge };

// Least squares, optionally with an L2 penalty on the weights (not the
// intercept), solved through the normal equations.
class LinearRegression {
 public:
  explicit LinearRegression(LinearKind kind = LinearKind::ols, double lambda = 0.0) : kind_(kind), lambda_(lambda) {
    if (!(lambda >= 0.0)) throw ParameterError("lambda must be non-negative");
    if (kind == LinearKind::ols) lambda_ = 0.0;
  }

  LinearRegression& fit(const Matrix& x, const Matrix& y) {
    detail::require_targets(x, y);
    const auto c = detail::center(x, y);
    const std::size_t n = c.x.rows, d = c.x.cols;
    Matrix xc = linalg::to_matrix(c.x);
    Matrix yc = detail::column_from(c.y);
    linalg::Dense gram = linalg::to_dense(matmul(xc.t(), xc));
    linalg::Dense rhs = linalg::to_dense(matmul(xc.t(), yc));
    for (std::size_t j = 0; j < d; ++j) gram(j, j) += lambda_;
    linalg::Dense w;
    try {
      w = linalg::solve(gram, rhs);
    } catch (const SingularMatrixError& e) {
      if (lambda_ > 0.0) throw;
      throw SingularMatrixError(std::string(e.what()) + "; the design is rank deficient (" + std::to_string(n) +
                                " samples, " + std::to_string(d) + " features), use ridge with lambda > 0");
    }
    double b = c.y_mean;
    for (std::size_t j = 0; j < d; ++j) b -= c.x_mean[j] * w(j, 0);
    state_ = {linalg::to_matrix(w), static_cast<float>(b)};
    fitted_ = true;
    return *this;
  }

  Matrix predict(const Matrix& x) const {
    detail::require_fitted(fitted_, "LinearRegression");
    return detail::linear_scores(state_, x);
  }

  bool fitted() const noexcept { return fitted_; }
  const LinearModelState& state() const noexcept { return state_; }
  const Matrix& weights() const noexcept { return state_.weights; }
  float bias() const noexcept { return state_.bias; }
  double lambda() const noexcept { return lambda_; }

  json to_json() const {
    detail::require_fitted(fitted_, "LinearRegression");
    return json{{"type", "linear_regression"},
                {"params", {{"kind", kind_ == LinearKind::ols ? "ols" : "ridge"}, {"lambda", lambda_}}},
                {"state", detail::state_to_json(state_)}};
  }

  static LinearRegression from_json(const json& j) {
    detail::expect_type(j, "linear_regression");
    const auto& p = j.at("params");
    LinearRegression m(p.at("kind") == "ols" ? LinearKind::ols : LinearKind::ridge, p.at("lambda").get<double>());
    m.state_ = detail::state_from_json(j.at("state"));
    m.fitted_ = true;
    return m;
  }

 private:
  LinearKind kind_;
  double lambda_;
  LinearModelState state_;
  bool fitted_ = false;
};

// Minimises 1/2 ||y - Xw - b||^2 + lambda ||w||_1 by cyclic coordinate
// descent with soft thresholding.
class Lasso {
 public:
  explicit Lasso(double lambda, std::size_t max_sweeps = 1000, double tol = 1e-6)
      : lambda_(lambda), max_sweeps_(max_sweeps), tol_(tol) {
    if (!(lambda > 0.0)) throw ParameterError("lasso lambda must be positive");
  }

  Lasso& fit(const Matrix& x, const Matrix& y) {
    detail::require_targets(x, y);
    const auto c = detail::center(x, y);
    const std::size_t n = c.x.rows, d = c.x.cols;
    std::vector<double> norm2(d, 0.0), w(d, 0.0), r = c.y;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) norm2[j] += c.x(i, j) * c.x(i, j);
    sweeps_ = 0;
    while (sweeps_ < max_sweeps_) {
      ++sweeps_;
      double max_change = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        if (norm2[j] == 0.0) continue;
        double rho = 0.0;
        for (std::size_t i = 0; i < n; ++i) rho += c.x(i, j) * (r[i] + c.x(i, j) * w[j]);
        const double updated = soft_threshold(rho, lambda_) / norm2[j];
        const double delta = updated - w[j];
        if (delta != 0.0) {
          for (std::size_t i = 0; i < n; ++i) r[i] -= c.x(i, j) * delta;
          w[j] = updated;
        }
        max_change = std::max(max_change, std::fabs(delta));
      }
      if (max_change < tol_) break;
    }
    double b = c.y_mean;
    for (std::size_t j = 0; j < d; ++j) b -= c.x_mean[j] * w[j];
    state_ = {detail::column_from(w), static_cast<float>(b)};
    fitted_ = true;
    return *this;
  }

  Matrix predict(const Matrix& x) const {
    detail::require_fitted(fitted_, "Lasso");
    return detail::linear_scores(state_, x);
  }

  static double soft_threshold(double v, double t) noexcept {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
  }

  bool fitted() const noexcept { return fitted_; }
  const LinearModelState& state() const noexcept { return state_; }
  const Matrix& weights() const noexcept { return state_.weights; }
  float bias() const noexcept { return state_.bias; }
  std::size_t sweeps() const noexcept { return sweeps_; }

  json to_json() const {
    detail::require_fitted(fitted_, "Lasso");
    return json{{"type", "lasso"},
                {"params", {{"lambda", lambda_}, {"max_sweeps", max_sweeps_}, {"tol", tol_}}},
                {"state", detail::state_to_json(state_)}};
  }

  static Lasso from_json(const json& j) {
    detail::expect_type(j, "lasso");
    const auto& p = j.at("params");
    Lasso m(p.at("lambda").get<double>(), p.at("max_sweeps").get<std::size_t>(), p.at("tol").get<double>());
    m.state_ = detail::state_from_json(j.at("state"));
    m.fitted_ = true;
    return m;
  }

 private:
  double lambda_;
  std::size_t max_sweeps_;
  double tol_;
  std::size_t sweeps_ = 0;
  LinearModelState state_;
  bool fitted_ = false;
};

// Objective value and gradient of a linear model at (w, b).
struct Objective {
  double value = 0.0;
  std::vector<double> grad_w;
  double grad_b = 0.0;
};

namespace objectives {

inline double sigmoid(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
inline double softplus(double z) noexcept { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// Mean negative log-likelihood for labels in {0,1} plus lambda/2 ||w||^2.
inline Objective logistic(const linalg::Dense& x, const std::vector<double>& y, const std::vector<double>& w, double b,
                          double lambda) {
  const std::size_t n = x.rows, d = x.cols;
  Objective o;
  o.grad_w.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double z = b;
    for (std::size_t j = 0; j < d; ++j) z += x(i, j) * w[j];
    o.value += softplus(z) - y[i] * z;
    const double g = sigmoid(z) - y[i];
    for (std::size_t j = 0; j < d; ++j) o.grad_w[j] += g * x(i, j);
    o.grad_b += g;
  }
  const double inv = 1.0 / static_cast<double>(n);
  o.value *= inv;
  o.grad_b *= inv;
  for (std::size_t j = 0; j < d; ++j) {
    o.grad_w[j] = o.grad_w[j] * inv + lambda * w[j];
    o.value += 0.5 * lambda * w[j] * w[j];
  }
  return o;
}

// Mean hinge loss max(0, 1 - y f) (margin 1) or perceptron loss
// max(0, -y f) (margin 0) for labels in {-1,+1}, plus lambda/2 ||w||^2.
// The gradient is the subgradient that is zero at the kink.
inline Objective margin_loss(const linalg::Dense& x, const std::vector<double>& y, const std::vector<double>& w,
                             double b, double lambda, double margin) {
  const std::size_t n = x.rows, d = x.cols;
  Objective o;
  o.grad_w.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double f = b;
    for (std::size_t j = 0; j < d; ++j) f += x(i, j) * w[j];
    const double slack = margin - y[i] * f;
    if (slack > 0) {
      o.value += slack;
      for (std::size_t j = 0; j < d; ++j) o.grad_w[j] -= y[i] * x(i, j);
      o.grad_b -= y[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  o.value *= inv;
  o.grad_b *= inv;
  for (std::size_t j = 0; j < d; ++j) {
    o.grad_w[j] = o.grad_w[j] * inv + lambda * w[j];
    o.value += 0.5 * lambda * w[j] * w[j];
  }
  return o;
}

}  // namespace objectives

// Binary logistic regression trained by full-batch gradient descent.
class LogisticRegression {
 public:
  explicit LogisticRegression(double learning_rate = 0.1, std::size_t epochs = 500, double lambda = 0.0)
      : learning_rate_(learning_rate), epochs_(epochs), lambda_(lambda) {
    if (!(learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
    if (!(lambda >= 0.0)) throw ParameterError("lambda must be non-negative");
  }

  LogisticRegression& fit(const Matrix& x, const Matrix& y) {
    detail::require_targets(x, y);
    const auto labels = detail::column(y);
    for (double v : labels)
      if (v != 0.0 && v != 1.0) throw LabelError("logistic regression labels must be 0 or 1, got " + std::to_string(v));
    const auto xd = linalg::to_dense(x);
    std::vector<double> w(x.cols(), 0.0);
    double b = 0.0;
    for (std::size_t e = 0; e < epochs_; ++e) {
      const auto o = objectives::logistic(xd, labels, w, b, lambda_);
      for (std::size_t j = 0; j < w.size(); ++j) w[j] -= learning_rate_ * o.grad_w[j];
      b -= learning_rate_ * o.grad_b;
    }
    state_ = {detail::column_from(w), static_cast<float>(b)};
    fitted_ = true;
    return *this;
  }

  // P(y = 1 | x) per row.
  Matrix predict(const Matrix& x) const {
    detail::require_fitted(fitted_, "LogisticRegression");
    auto v = detail::linear_scores(state_, x).to_vector();
    for (auto& z : v) z = static_cast<float>(objectives::sigmoid(z));
    return Matrix(x.rows(), 1, std::move(v));
  }

  // 0/1 decision at probability 0.5.
  Matrix classify(const Matrix& x) const {
    auto v = predict(x).to_vector();
    for (auto& p : v) p = p >= 0.5f ? 1.0f : 0.0f;
    return Matrix(x.rows(), 1, std::move(v));
  }

  bool fitted() const noexcept { return fitted_; }
  const LinearModelState& state() const noexcept { return state_; }
  const Matrix& weights() const noexcept { return state_.weights; }
  float bias() const noexcept { return state_.bias; }
  double lambda() const noexcept { return lambda_; }

  json to_json() const {
    detail::require_fitted(fitted_, "LogisticRegression");
    return json{{"type", "logistic_regression"},
                {"params", {{"learning_rate", learning_rate_}, {"epochs", epochs_}, {"lambda", lambda_}}},
                {"state", detail::state_to_json(state_)}};
  }

  static LogisticRegression from_json(const json& j) {
    detail::expect_type(j, "logistic_regression");
    const auto& p = j.at("params");
    LogisticRegression m(p.at("learning_rate").get<double>(), p.at("epochs").get<std::size_t>(),
                         p.at("lambda").get<double>());
    m.state_ = detail::state_from_json(j.at("state"));
    m.fitted_ = true;
    return m;
  }

 private:
  double learning_rate_;
  std::size_t epochs_;
  double lambda_;
  LinearModelState state_;
  bool fitted_ = false;
};

enum class SgdAlgorithm { perceptron, sgdsvm };

inline SgdAlgorithm parse_sgd_algorithm(const std::string& tag) {
  if (tag == "perceptron") return SgdAlgorithm::perceptron;
  if (tag == "sgdsvm") return SgdAlgorithm::sgdsvm;
  throw ParameterError("unknown SGD algorithm '" + tag + "' (expected perceptron or sgdsvm)");
}

inline const char* to_string(SgdAlgorithm a) noexcept { return a == SgdAlgorithm::perceptron ? "perceptron" : "sgdsvm"; }

struct SgdOptions {
  SgdAlgorithm algorithm = SgdAlgorithm::sgdsvm;
  bool aver = true;       // return the running average of the iterates
  double lambda = 1e-4;   // L2 shrinkage
  std::size_t epochs = 100;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
};

// Linear binary classifier trained one sample at a time.
//
//   perceptron: on y (w.x + b) <= 0,  w += eta y x,  b += eta y
//   sgdsvm:     w *= (1 - eta lambda); on y (w.x + b) < 1,  w += eta y x, b += eta y
//
// with eta_t = eta_0 / (1 + eta_0 lambda t); the perceptron shrinks by lambda
// too when it is non-zero. Labels may be {-1,+1} or {0,1}; predict returns the
// raw score w.x + b.
class SGDRegressor {
 public:
  explicit SGDRegressor(SgdOptions opts = {}) : opts_(opts) {
    if (!(opts.lambda >= 0.0)) throw ParameterError("lambda must be non-negative");
    if (!(opts.learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
    if (opts.epochs == 0) throw ParameterError("epochs must be at least 1");
  }

  SGDRegressor& fit(const Matrix& x, const Matrix& y) {
    detail::require_targets(x, y);
    const auto labels = signed_labels(y);
    const auto xd = linalg::to_dense(x);
    const std::size_t n = xd.rows, d = xd.cols;
    const double margin = opts_.algorithm == SgdAlgorithm::sgdsvm ? 1.0 : 0.0;
    std::vector<double> w(d, 0.0), w_avg(d, 0.0);
    double b = 0.0, b_avg = 0.0;
    std::size_t t = 0;
    SplitMix64 rng(opts_.seed);
    weight_norms_.clear();
    epochs_run_ = 0;
    for (std::size_t epoch = 0; epoch < opts_.epochs; ++epoch) {
      ++epochs_run_;
      std::size_t mistakes = 0;
      for (std::size_t i : stats::permutation(n, rng)) {
        const double eta = opts_.learning_rate / (1.0 + opts_.learning_rate * opts_.lambda * static_cast<double>(t));
        double f = b;
        for (std::size_t j = 0; j < d; ++j) f += w[j] * xd(i, j);
        const double yf = labels[i] * f;
        if (yf <= 0.0) ++mistakes;
        if (opts_.lambda > 0.0) {
          const double shrink = std::max(0.0, 1.0 - eta * opts_.lambda);
          for (auto& wj : w) wj *= shrink;
        }
        if (yf < margin || (margin == 0.0 && yf <= 0.0)) {
          for (std::size_t j = 0; j < d; ++j) w[j] += eta * labels[i] * xd(i, j);
          b += eta * labels[i];
        }
        ++t;
        const double k = static_cast<double>(t);
        for (std::size_t j = 0; j < d; ++j) w_avg[j] += (w[j] - w_avg[j]) / k;
        b_avg += (b - b_avg) / k;
      }
      const auto& cur = opts_.aver ? w_avg : w;
      double norm = 0.0;
      for (double v : cur) norm += v * v;
      weight_norms_.push_back(std::sqrt(norm));
      if (opts_.algorithm == SgdAlgorithm::perceptron && !opts_.aver && mistakes == 0) break;
    }
    state_ = opts_.aver ? LinearModelState{detail::column_from(w_avg), static_cast<float>(b_avg)}
                        : LinearModelState{detail::column_from(w), static_cast<float>(b)};
    fitted_ = true;
    return *this;
  }

  // Raw scores X w + b; the sign is the class.
  Matrix predict(const Matrix& x) const {
    detail::require_fitted(fitted_, "SGDRegressor");
    return detail::linear_scores(state_, x);
  }

  // Class labels in the encoding seen by fit.
  Matrix classify(const Matrix& x) const {
    auto v = predict(x).to_vector();
    for (auto& s : v) s = s > 0.0f ? 1.0f : (zero_one_ ? 0.0f : -1.0f);
    return Matrix(x.rows(), 1, std::move(v));
  }

  bool fitted() const noexcept { return fitted_; }
  const SgdOptions& options() const noexcept { return opts_; }
  const LinearModelState& state() const noexcept { return state_; }
  const Matrix& weights() const noexcept { return state_.weights; }
  float bias() const noexcept { return state_.bias; }
  std::size_t epochs_run() const noexcept { return epochs_run_; }
  // ||w|| after each epoch (of the average when aver is set).
  const std::vector<double>& weight_norms() const noexcept { return weight_norms_; }

  json to_json() const {
    detail::require_fitted(fitted_, "SGDRegressor");
    return json{{"type", "sgd"},
                {"params",
                 {{"algorithm", to_string(opts_.algorithm)},
                  {"aver", opts_.aver},
                  {"lambda", opts_.lambda},
                  {"epochs", opts_.epochs},
                  {"learning_rate", opts_.learning_rate},
                  {"seed", opts_.seed}}},
                {"state", {{"linear", detail::state_to_json(state_)}, {"zero_one_labels", zero_one_}}}};
  }

  static SGDRegressor from_json(const json& j) {
    detail::expect_type(j, "sgd");
    const auto& p = j.at("params");
    SgdOptions o;
    o.algorithm = parse_sgd_algorithm(p.at("algorithm").get<std::string>());
    o.aver = p.at("aver").get<bool>();
    o.lambda = p.at("lambda").get<double>();
    o.epochs = p.at("epochs").get<std::size_t>();
    o.learning_rate = p.at("learning_rate").get<double>();
    o.seed = p.at("seed").get<std::uint64_t>();
    SGDRegressor m(o);
    m.state_ = detail::state_from_json(j.at("state").at("linear"));
    m.zero_one_ = j.at("state").at("zero_one_labels").get<bool>();
    m.fitted_ = true;
    return m;
  }

 private:
  std::vector<double> signed_labels(const Matrix& y) {
    auto v = detail::column(y);
    bool has_neg = false, has_zero = false;
    for (double l : v) {
      if (l == -1.0) has_neg = true;
      else if (l == 0.0) has_zero = true;
      else if (l != 1.0) throw LabelError("SGD labels must be -1/+1 or 0/1, got " + std::to_string(l));
    }
    if (has_neg && has_zero) throw LabelError("SGD labels mix -1 and 0 encodings");
    zero_one_ = has_zero;
    for (auto& l : v) l = l > 0.0 ? 1.0 : -1.0;
    return v;
  }

  SgdOptions opts_;
  LinearModelState state_;
  bool zero_one_ = false;
  bool fitted_ = false;
  std::size_t epochs_run_ = 0;
  std::vector<double> weight_norms_;
};

}  // namespace matcha::ml

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "matcha/matcha.hpp"

namespace matcha::cli {

struct CliConfig {
  std::string command;
  std::optional<backend::BackendChoice> backend;  // unset: environment, then auto
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "out";
  std::size_t repetitions = 5;
  int width = plot::kDefaultWidth;
  int height = plot::kDefaultHeight;
};

// The backend from the flag, else the environment.
inline backend::RuntimeConfig resolve_backend(const CliConfig& cfg) {
  auto rc = backend::RuntimeConfig::from_env();
  if (cfg.backend) rc.backend = *cfg.backend;
  return rc;
}

inline backend::RuntimeConfig apply_backend(const CliConfig& cfg) {
  const auto rc = resolve_backend(cfg);
  backend::Runtime::instance().configure(rc);
  return rc;
}

inline void prepare_output(const CliConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec || !std::filesystem::is_directory(cfg.output_dir)) {
    throw ConfigurationError("output directory '" + cfg.output_dir.string() + "' cannot be created");
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

namespace demo {

// n points per class from isotropic-per-axis Gaussians.
struct Blobs {
  Matrix samples;
  Matrix labels;
};

inline Blobs blobs(std::uint64_t seed, std::size_t per_class, const std::vector<std::array<double, 4>>& spec,
                   const std::vector<float>& label_values) {
  SplitMix64 rng(seed);
  std::vector<float> x, y;
  for (std::size_t c = 0; c < spec.size(); ++c) {
    const auto [mx, my, sx, sy] = spec[c];
    for (std::size_t i = 0; i < per_class; ++i) {
      x.push_back(static_cast<float>(mx + sx * rng.normal()));
      x.push_back(static_cast<float>(my + sy * rng.normal()));
      y.push_back(label_values[c]);
    }
  }
  const std::size_t n = y.size();
  return {Matrix(n, 2, std::move(x)), Matrix(n, 1, std::move(y))};
}

struct Bounds {
  double xmin, xmax, ymin, ymax;
};

// Data extent widened by one unit on every side.
inline Bounds bounds_of(const Matrix& samples) {
  const Matrix xs = get_col(samples, 0), ys = get_col(samples, 1);
  return {min(xs) - 1.0, max(xs) + 1.0, min(ys) - 1.0, max(ys) + 1.0};
}

inline Matrix point(double x, double y) { return Matrix(1, 2, {static_cast<float>(x), static_cast<float>(y)}); }

struct Outputs {
  std::vector<std::filesystem::path> files;
};

// Two Gaussian blobs, GMM(2, 100, 1e-7), filled log-density map with a
// colorbar and the samples on top.
inline Outputs gmm(const CliConfig& cfg) {
  const auto data = blobs(cfg.seed, 150, {{-2.0, -1.0, 0.8, 0.8}, {2.0, 1.5, 1.0, 0.6}}, {0.0f, 1.0f});
  ml::GaussianMixture model(2, 100, 1e-7, cfg.seed);
  model.fit(data.samples);
  const auto b = bounds_of(data.samples);
  plot::Figure fig(cfg.width, cfg.height);
  fig.contour_decision_function(b.xmin, b.xmax, b.ymin, b.ymax, {},
                                [&](double x, double y) { return model.score(point(x, y)); });
  fig.colorbar();
  fig.scatter(get_col(data.samples, 0), get_col(data.samples, 1));
  fig.xlabel("x");
  fig.ylabel("y");
  fig.legend({"log p(x, y)", "Datapoints"});
  Outputs o;
  o.files = {cfg.output_dir / "gmm.svg", cfg.output_dir / "gmm_model.json"};
  plot::show(fig, o.files[0].string());
  write_text(o.files[1], ml::save_model(model) + "\n");
  return o;
}

// Two classes labelled 1 and 2, 3-NN, boundary where the prediction crosses
// 1.5.
inline Outputs knn(const CliConfig& cfg) {
  const auto data = blobs(cfg.seed, 60, {{-1.0, -0.5, 1.0, 1.0}, {1.2, 0.8, 1.0, 1.0}}, {1.0f, 2.0f});
  ml::KNeighborsClassifier model(3);
  model.fit(data.samples, data.labels);
  const auto b = bounds_of(data.samples);
  plot::Figure fig(cfg.width, cfg.height);
  fig.scatter(get_col(data.samples, 0), get_col(data.samples, 1), data.labels.t());
  plot::ContourOptions opts;
  opts.levels = {1.5};
  opts.colors = {"k"};
  opts.linestyles = {"solid"};
  fig.contour_decision_function(b.xmin, b.xmax, b.ymin, b.ymax, opts,
                                [&](double x, double y) { return model.predict(point(x, y)).get(0, 0); });
  fig.xlabel("x");
  fig.ylabel("y");
  fig.legend({"Datapoints(2classes)", "Decision boundary (k=3)"});
  Outputs o;
  o.files = {cfg.output_dir / "knn.svg", cfg.output_dir / "knn_model.json"};
  plot::show(fig, o.files[0].string());
  write_text(o.files[1], ml::save_model(model) + "\n");
  return o;
}

// Linearly separable blobs; perceptron {aver: false, lambda: 0} in red and
// SGD-SVM in blue, both at level 0.
inline Outputs sgd(const CliConfig& cfg) {
  const auto data = blobs(cfg.seed, 50, {{-2.0, -1.5, 0.7, 0.7}, {2.0, 1.5, 0.7, 0.7}}, {-1.0f, 1.0f});
  ml::SgdOptions p;
  p.algorithm = ml::SgdAlgorithm::perceptron;
  p.aver = false;
  p.lambda = 0.0;
  p.seed = cfg.seed;
  ml::SGDRegressor perceptron(p);
  perceptron.fit(data.samples, data.labels);
  ml::SgdOptions s;
  s.algorithm = ml::SgdAlgorithm::sgdsvm;
  s.seed = cfg.seed;
  ml::SGDRegressor svm(s);
  svm.fit(data.samples, data.labels);

  const auto b = bounds_of(data.samples);
  plot::Figure fig(cfg.width, cfg.height);
  fig.scatter(get_col(data.samples, 0), get_col(data.samples, 1), data.labels.t());
  plot::ContourOptions red;
  red.levels = {0.0};
  red.colors = {"r"};
  red.linestyles = {"solid"};
  fig.contour_decision_function(b.xmin, b.xmax, b.ymin, b.ymax, red,
                                [&](double x, double y) { return perceptron.predict(point(x, y)).get(0, 0); });
  plot::ContourOptions blue = red;
  blue.colors = {"b"};
  fig.contour_decision_function(b.xmin, b.xmax, b.ymin, b.ymax, blue,
                                [&](double x, double y) { return svm.predict(point(x, y)).get(0, 0); });
  fig.xlabel("x");
  fig.ylabel("y");
  fig.legend({"Datapoints(2classes)", "Decision boundary (perceptron)", "Decision boundary (SGD SVM)"});
  Outputs o;
  o.files = {cfg.output_dir / "sgd.svg", cfg.output_dir / "sgd_perceptron_model.json",
             cfg.output_dir / "sgd_svm_model.json"};
  plot::show(fig, o.files[0].string());
  write_text(o.files[1], ml::save_model(perceptron) + "\n");
  write_text(o.files[2], ml::save_model(svm) + "\n");
  return o;
}

}  // namespace demo

inline int cmd_bench(const CliConfig& cfg, std::ostream& out) {
  const auto rc = resolve_backend(cfg);
  prepare_output(cfg);
  std::vector<backend::BackendChoice> backends;
  switch (rc.backend) {
    case backend::BackendChoice::seq: backends = {backend::BackendChoice::seq}; break;
    case backend::BackendChoice::parallel: backends = {backend::BackendChoice::parallel}; break;
    case backend::BackendChoice::automatic:
      backends = {backend::BackendChoice::seq, backend::BackendChoice::parallel};
      break;
  }
  bench::RunOptions opts;
  opts.repetitions = cfg.repetitions;
  opts.seed = cfg.seed;
  opts.dispatch_threshold = rc.dispatch_threshold;
  const auto report = bench::run(bench::define_tasks(), backends, opts);
  out << bench::format_table(report);
  const auto path = cfg.output_dir / "bench.json";
  write_text(path, bench::to_json(report).dump(2) + "\n");
  out << "\nwrote " << path.string() << "\n";
  return 0;
}

inline int cmd_demo(const CliConfig& cfg, std::ostream& out) {
  apply_backend(cfg);
  prepare_output(cfg);
  demo::Outputs o;
  if (cfg.command == "demo-gmm") o = demo::gmm(cfg);
  else if (cfg.command == "demo-knn") o = demo::knn(cfg);
  else o = demo::sgd(cfg);
  for (const auto& f : o.files) out << "wrote " << f.string() << "\n";
  return 0;
}

inline int cmd_matinfo(const CliConfig& cfg, std::ostream& out) {
  const auto devices = backend::enumerate_devices();
  out << "devices:\n";
  for (const auto& d : devices) {
    out << "  [" << d.device_index << "] " << d.platform_name << " (" << backend::to_string(d.device_kind) << ", "
        << d.max_parallel_units << " parallel units)\n";
  }
  const auto sel = backend::select_device(devices);
  out << "selected: " << sel.platform_name << " #" << sel.device_index << "\n";
  const auto rc = apply_backend(cfg);
  auto& rt = backend::Runtime::instance();
  out << "backend: " << backend::to_string(rc.backend) << " (parallel " << (rt.parallel_active() ? "active" : "inactive")
      << ", dispatch threshold " << rc.dispatch_threshold << ")\n";
  if (!rt.unavailable_reason().empty()) out << "note: " << rt.unavailable_reason() << "\n";
  return 0;
}

}  // namespace matcha::cli

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "commands.hpp"
#include "support.hpp"

using namespace matcha;
using backend::BackendChoice;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// |got - want| / |want|, absolute when want is zero.
double rel(double got, double want) {
  const double d = std::fabs(got - want);
  return want == 0.0 ? d : d / std::fabs(want);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Outcome oracle_equivalence() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  constexpr ElementOp ops[] = {ElementOp::add, ElementOp::sub, ElementOp::mul, ElementOp::div};
  support::Rng rng(20240501);
  double worst_mm = 0.0, worst_conv = 0.0;
  std::size_t instances = 0;
  for (BackendChoice choice : {BackendChoice::seq, BackendChoice::parallel}) {
    backend::ScopedBackend scope(choice, 1);
    for (int trial = 0; trial < 500; ++trial, ++instances) {
      const std::size_t r = 1 + rng.below(64), c = 1 + rng.below(64), k = 1 + rng.below(64);
      const std::uint64_t seed = 77000 + static_cast<std::uint64_t>(trial);
      const Matrix a = support::random_layout(r, c, seed, rng.below(2));
      const Matrix b = support::random_layout(r, c, seed + 1, rng.below(2));
      const Matrix m = support::random_layout(c, k, seed + 2, rng.below(2));

      const Matrix prod = matmul(a, m);
      const auto want = support::naive_matmul(a, m);
      const auto got = prod.to_vector();
      for (std::size_t i = 0; i < got.size(); ++i) worst_mm = std::max(worst_mm, rel(got[i], want[i]));

      const ElementOp op = ops[rng.below(4)];
      const Matrix e = elementwise(op, a, b);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) {
          const float x = a.get(i, j), y = b.get(i, j);
          const float w = op == ElementOp::add ? x + y : op == ElementOp::sub ? x - y : op == ElementOp::mul ? x * y : x / y;
          const float g = e.get(i, j);
          o.require(std::isnan(w) ? std::isnan(g) : g == w && std::signbit(g) == std::signbit(w),
                    "elementwise " + std::string(to_string(op)) + " differs at trial " + std::to_string(trial));
        }

      const Matrix t = a.t();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
          o.require(t.get(j, i) == a.get(i, j), "transpose differs at trial " + std::to_string(trial));

      const std::size_t kr = 1 + rng.below(std::min<std::size_t>(r, 7)), kc = 1 + rng.below(std::min<std::size_t>(c, 7));
      const Matrix kern = support::random_layout(kr, kc, seed + 3, rng.below(2));
      const bool same = rng.below(2);
      const Matrix conv = convolve2d(a, kern, same ? ConvMode::same : ConvMode::valid);
      const auto cw = support::naive_convolve(a, kern, same);
      const auto cg = conv.to_vector();
      o.require(cg.size() == cw.size(), "convolve2d shape differs at trial " + std::to_string(trial));
      for (std::size_t i = 0; i < std::min(cg.size(), cw.size()); ++i) worst_conv = std::max(worst_conv, rel(cg[i], cw[i]));
    }
  }
  const double secs = seconds_since(t0);
  o.require(worst_mm <= 1e-5, "matmul relative error " + fmt(worst_mm));
  o.require(worst_conv <= 1e-5, "convolve2d relative error " + fmt(worst_conv));
  o.require(secs < 30.0, "took " + fmt(secs) + " s");
  if (o.pass) {
    o.detail = std::to_string(instances) + " instances (500 per backend), matmul err " + fmt(worst_mm) +
               ", convolve2d err " + fmt(worst_conv) + ", elementwise and transpose exact, " + fmt(secs) + " s";
  }
  return o;
}

bench::TimingReport g_report;
double g_bench_seconds = 0.0;

Outcome backend_equivalence() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  bench::RunOptions opts;
  opts.repetitions = 5;
  g_report = bench::run(bench::define_tasks(), {BackendChoice::seq, BackendChoice::parallel}, opts);
  g_bench_seconds = seconds_since(t0);
  o.require(g_report.unavailable.empty(), "parallel backend unavailable");
  double worst = 0.0;
  for (const auto& t : bench::define_tasks()) {
    const auto* s = g_report.find(t.id, "seq");
    const auto* p = g_report.find(t.id, "parallel");
    o.require(s && p, t.id + " missing a backend column");
    if (!s || !p) continue;
    o.require(s->times_ms.size() == 5 && p->times_ms.size() == 5, t.id + " lacks 5 timed repetitions");
    const double e = rel(p->checksum, s->checksum);
    worst = std::max(worst, e);
    o.require(e <= 1e-3, t.id + " checksums differ by " + fmt(e));
  }
  o.require(g_bench_seconds < 120.0, "harness took " + fmt(g_bench_seconds) + " s");
  if (o.pass) {
    o.detail = "4 tasks x 2 backends x 5 repetitions, worst checksum difference " + fmt(worst) + ", " +
               fmt(g_bench_seconds) + " s";
  }
  return o;
}

Outcome speedup_direction() {
  Outcome o;
  const auto* s = g_report.find("task3", "seq");
  const auto* p = g_report.find("task3", "parallel");
  o.require(s && p, "task3 timings missing");
  if (!o.pass) return o;
  const unsigned cores = std::max(1u, std::thread::hardware_concurrency());
  const bool violated = p->mean_ms > s->mean_ms;
  o.require(g_report.task3_speedup_violated() == violated, "report flag disagrees with the means");
  o.require(bench::to_json(g_report)["task3_speedup_violation"].get<bool>() == violated, "JSON flag disagrees");
  o.require(!violated, "parallel " + fmt(p->mean_ms) + " ms > sequential " + fmt(s->mean_ms) + " ms on " +
                           std::to_string(cores) + " hardware thread(s)");
  if (o.pass) {
    o.detail = "task3 parallel " + fmt(p->mean_ms) + " ms <= sequential " + fmt(s->mean_ms) + " ms (" +
               fmt(s->mean_ms / p->mean_ms) + "x) on " + std::to_string(cores) + " hardware thread(s); flag consistent";
  }
  return o;
}

Outcome transfer_accounting() {
  Outcome o;
  backend::ContextOptions opts;
  opts.dispatch_threshold = 1;
  auto ctx = support::cpu_context(opts);
  const Matrix a = random(64, 64, 1), b = random(64, 64, 2);
  ctx.reset_stats();
  const Matrix c1 = ctx.elementwise(ElementOp::add, a, b);
  const Matrix c2 = ctx.elementwise(ElementOp::mul, c1, a);
  const Matrix c3 = ctx.matmul(c2, b);
  const Matrix c4 = ctx.elementwise(ElementOp::sub, c3, a);
  const Matrix c5 = ctx.elementwise(ElementOp::div, c4, b);
  const auto before = ctx.stats();
  o.require(before.downloads == 0 && before.synchronizations == 0,
            "device ops alone downloaded " + std::to_string(before.downloads) + " and synchronized " +
                std::to_string(before.synchronizations) + " times");
  o.require(before.kernels_enqueued == 5, std::to_string(before.kernels_enqueued) + " kernels enqueued");
  const float first = c5.get(0, 0);
  const auto after = ctx.stats();
  const std::size_t host_reads = 1;
  o.require(after.downloads == 1, std::to_string(after.downloads) + " downloads");
  o.require(after.uploads <= 2, std::to_string(after.uploads) + " uploads for 2 distinct inputs");
  o.require(after.synchronizations == host_reads,
            std::to_string(after.synchronizations) + " synchronizations for " + std::to_string(host_reads) + " read");
  const Matrix want = sequential::elementwise(
      ElementOp::div,
      sequential::elementwise(ElementOp::sub,
                              sequential::matmul(sequential::elementwise(ElementOp::mul,
                                                                         sequential::elementwise(ElementOp::add, a, b), a),
                                                 b),
                              a),
      b);
  o.require(support::bit_equal(c5, want) && first == want.get(0, 0), "device chain differs from the sequential chain");
  if (o.pass) {
    o.detail = "5 chained device ops then 1 read: " + std::to_string(after.uploads) + " uploads, " +
               std::to_string(after.downloads) + " download, " + std::to_string(after.synchronizations) +
               " synchronization; result bit-equal to the sequential chain";
  }
  return o;
}

Outcome map_generator() {
  Outcome o;
  auto ctx = support::cpu_context();
  const std::string expr = "1.0 / ( exp(-a[i]) + 1.0 )";
  auto sigmoid = ctx.map_generator(expr, 1);
  const float at_zero = sigmoid(zeros(1, 1)).get(0, 0);
  o.require(at_zero == 0.5f, "sigmoid(0) = " + fmt(at_zero));
  support::Rng rng(5);
  std::vector<float> v(1000);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-8.0, 8.0));
  const Matrix x(1000, 1, v);
  const auto got = sigmoid(x).to_vector();
  double worst = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) worst = std::max(worst, std::fabs(got[i] - 1.0 / (std::exp(-double(v[i])) + 1.0)));
  o.require(worst <= 1e-6, "sigmoid differs from the scalar loop by " + fmt(worst));
  std::size_t rejected = 0;
  const std::vector<std::string> bad = {"a[i] ++ 1", "exp(a[i]", "b[i] + 1", "foo(a[i])", "a[i] +", "a[j]", "", "1 2"};
  for (const auto& e : bad) {
    try {
      (void)ctx.map_generator(e, 1);
    } catch (const CompileError&) {
      ++rejected;
    }
  }
  o.require(rejected == bad.size(), std::to_string(bad.size() - rejected) + " invalid expressions accepted");
  if (o.pass) {
    o.detail = "sigmoid(0) == 0.5 exactly, 1000-element max error " + fmt(worst) + ", " + std::to_string(rejected) +
               " invalid expressions rejected at generation";
  }
  return o;
}

Outcome ml_properties() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();

  for (std::uint64_t seed : {11u, 12u, 13u}) {
    auto [x, y] = support::two_blobs(seed, 100, 2.5, 0.8);
    ml::GaussianMixture gmm(2, 100, 1e-7, seed);
    gmm.fit(x);
    const auto& h = gmm.log_likelihood_history();
    for (std::size_t t = 1; t < h.size(); ++t)
      o.require(h[t] >= h[t - 1] - 1e-9 * std::fabs(h[t - 1]), "GMM log-likelihood decreased, seed " + std::to_string(seed));

    ml::KMeans km(3, 300, 1e-4, seed);
    km.fit(x);
    const auto& in = km.inertia_history();
    for (std::size_t t = 1; t < in.size(); ++t)
      o.require(in[t] <= in[t - 1] * (1 + 1e-12), "k-means inertia increased, seed " + std::to_string(seed));
  }

  {
    const Matrix x = random(60, 3, 21);
    const Matrix y = add(matmul(x, Matrix(3, 1, {1.0f, -2.0f, 0.5f})), random(60, 1, 22));
    ml::LinearRegression ols(ml::LinearKind::ols), ridge(ml::LinearKind::ridge, 0.0);
    ols.fit(x, y);
    ridge.fit(x, y);
    double worst = std::fabs(double(ols.bias()) - ridge.bias());
    for (std::size_t j = 0; j < 3; ++j) worst = std::max(worst, std::fabs(double(ols.weights().get(j, 0)) - ridge.weights().get(j, 0)));
    o.require(worst <= 1e-5, "ridge(0) differs from OLS by " + fmt(worst));
  }

  {
    std::vector<float> v;
    for (int t = -10; t <= 10; ++t) {
      v.push_back(static_cast<float>(t));
      v.push_back(static_cast<float>(2 * t));
    }
    ml::PCA pca(1);
    pca.fit(Matrix(21, 2, v));
    const double s = pca.components().get(0, 0) < 0 ? -1.0 : 1.0;
    const double e0 = std::fabs(s * pca.components().get(0, 0) - 1 / std::sqrt(5.0));
    const double e1 = std::fabs(s * pca.components().get(1, 0) - 2 / std::sqrt(5.0));
    o.require(std::max(e0, e1) <= 1e-4, "PCA component off by " + fmt(std::max(e0, e1)));
  }

  {
    const Matrix x = random(80, 3, 31);
    ml::CCA cca(1);
    cca.fit(x, x);
    o.require(cca.correlations()[0] >= 1 - 1e-4, "CCA(X, X) correlation " + fmt(cca.correlations()[0]));
  }

  {
    auto [x, y] = support::two_blobs(41, 50, 6.0, 0.6);
    ml::SgdOptions p;
    p.algorithm = ml::SgdAlgorithm::perceptron;
    p.aver = false;
    p.lambda = 0.0;
    p.epochs = 100;
    p.seed = 41;
    ml::SGDRegressor perceptron(p);
    perceptron.fit(x, y);
    const auto pred = perceptron.classify(x).to_vector(), truth = y.to_vector();
    std::size_t errors = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) errors += pred[i] != truth[i];
    o.require(errors == 0, "perceptron left " + std::to_string(errors) + " training errors");
    o.require(perceptron.epochs_run() <= 100, "perceptron ran " + std::to_string(perceptron.epochs_run()) + " epochs");
  }

  {
    auto [x, y] = support::two_blobs(51, 60, 1.0, 1.0);
    ml::KNeighborsClassifier knn(1);
    knn.fit(x, y);
    o.require(support::bit_equal(knn.predict(x), y), "1-NN training accuracy below 1.0");
  }

  {
    auto [x, y] = support::two_blobs(61, 40, 1.0, 1.0);
    ml::LogisticRegression lr(0.5, 300, 0.01);
    lr.fit(x, y);
    const auto xd = linalg::to_dense(x);
    const auto yv = ml::detail::column(y);
    std::vector<double> w = {lr.weights().get(0, 0), lr.weights().get(1, 0)};
    const double b = lr.bias();
    const auto g = ml::objectives::logistic(xd, yv, w, b, 0.01);
    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t j = 0; j <= w.size(); ++j) {
      auto wp = w, wm = w;
      double bp = b, bm = b;
      if (j < w.size()) {
        wp[j] += h;
        wm[j] -= h;
      } else {
        bp += h;
        bm -= h;
      }
      const double fd =
          (ml::objectives::logistic(xd, yv, wp, bp, 0.01).value - ml::objectives::logistic(xd, yv, wm, bm, 0.01).value) /
          (2 * h);
      worst = std::max(worst, std::fabs(fd - (j < w.size() ? g.grad_w[j] : g.grad_b)));
    }
    o.require(worst <= 1e-4, "logistic gradient differs from finite differences by " + fmt(worst));
  }

  const double secs = seconds_since(t0);
  o.require(secs < 60.0, "took " + fmt(secs) + " s");
  if (o.pass) o.detail = "GMM, k-means, ridge, PCA, CCA, perceptron, 1-NN and logistic checks hold, " + fmt(secs) + " s";
  return o;
}

Outcome demo_reproduction() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "matcha_acceptance_demos";
  fs::remove_all(root);
  backend::ScopedBackend scope(BackendChoice::seq);
  using Demo = std::function<cli::demo::Outputs(const cli::CliConfig&)>;
  const std::vector<std::pair<std::string, Demo>> demos = {
      {"gmm", cli::demo::gmm}, {"knn", cli::demo::knn}, {"sgd", cli::demo::sgd}};
  for (const auto& [name, run] : demos) {
    std::vector<std::vector<std::string>> contents;
    for (int pass = 0; pass < 2; ++pass) {
      cli::CliConfig cfg;
      cfg.seed = 1;
      cfg.output_dir = root / (name + std::to_string(pass));
      cli::prepare_output(cfg);
      const auto out = run(cfg);
      std::vector<std::string> files;
      for (const auto& f : out.files) files.push_back(slurp(f));
      contents.push_back(files);
    }
    o.require(contents[0] == contents[1], name + " outputs differ between runs");
    const std::string& svg = contents[0][0];
    o.require(support::xml_problem(svg).empty(), name + ".svg is not well formed: " + support::xml_problem(svg));
    o.require(svg.find("<svg xmlns=\"http://www.w3.org/2000/svg\"") != std::string::npos, name + ".svg lacks the SVG root");
    if (name == "gmm") {
      o.require(svg.find("<g class=\"pcolor\"") != std::string::npos, "gmm.svg has no filled contour");
      o.require(support::count(svg, "<path") >= 1, "gmm.svg has no contour path");
      o.require(svg.find("<g class=\"colorbar\"") != std::string::npos, "gmm.svg has no colorbar");
    } else if (name == "knn") {
      o.require(support::count(svg, "<g class=\"contour\"") == 1, "knn.svg needs exactly one contour level");
      o.require(svg.find("data-level=\"1.5\"") != std::string::npos, "knn.svg boundary is not at level 1.5");
      o.require(support::count(svg, "<path") >= 1, "knn.svg boundary has no path");
    } else {
      o.require(support::count(svg, "<g class=\"contour\"") == 2, "sgd.svg needs two contour levels");
      o.require(support::count(svg, "data-level=\"0\"") == 2, "sgd.svg boundaries are not both at level 0");
      o.require(svg.find("stroke=\"#ff0000\"") != std::string::npos && svg.find("stroke=\"#0000ff\"") != std::string::npos,
                "sgd.svg boundaries are not red and blue");
      o.require(support::count(svg, "<g class=\"legend-entry\"") == 3, "sgd.svg legend does not have 3 entries");
    }
  }
  fs::remove_all(root);
  if (o.pass) o.detail = "gmm, knn and sgd SVGs well formed with the required elements; outputs byte-identical across runs";
  return o;
}

Outcome contour_accuracy() {
  Outcome o;
  plot::Figure fig;
  plot::ContourOptions opts;
  opts.levels = {0.5};
  opts.grid = 100;
  fig.contour_decision_function(-1, 1, -1, 1, opts, [](double x, double y) { return x * x + y * y; });
  const auto& c = std::get<plot::ContourElement>(fig.elements().front());
  const double bound = 2.0 * (2.0 / 100.0);
  double worst = 0.0;
  std::size_t vertices = 0;
  for (const auto& pl : c.levels.front().lines)
    for (const auto& p : pl.points) {
      worst = std::max(worst, std::fabs(std::hypot(p.x, p.y) - std::sqrt(0.5)));
      ++vertices;
    }
  o.require(vertices > 0, "no vertices emitted");
  o.require(worst <= bound, "max deviation " + fmt(worst) + " exceeds " + fmt(bound));
  if (o.pass) o.detail = std::to_string(vertices) + " vertices, max deviation " + fmt(worst) + " <= " + fmt(bound);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle equivalence", oracle_equivalence},
      {"backend equivalence", backend_equivalence},
      {"speedup direction", speedup_direction},
      {"laziness and transfer accounting", transfer_accounting},
      {"map generator", map_generator},
      {"ML property suite", ml_properties},
      {"demo reproduction", demo_reproduction},
      {"contour accuracy", contour_accuracy},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

}  // namespace

int main(int argc, char** argv) {
  using namespace matcha;
  cli::CliConfig cfg;
  std::string backend_flag;

  CLI::App app{"matcha: dense matrices, a parallel compute backend, estimators and plots"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--backend", backend_flag, "seq, parallel or auto (default: MATCHA_BACKEND, else auto)")
        ->check(CLI::IsMember({"seq", "parallel", "auto"}));
    sub->add_option("--seed", cfg.seed, "random seed");
    sub->add_option("--out", cfg.output_dir, "output directory");
  };
  auto add_figure = [&](CLI::App* sub) {
    sub->add_option("--width", cfg.width, "SVG width in pixels")->check(CLI::Range(100, 10000));
    sub->add_option("--height", cfg.height, "SVG height in pixels")->check(CLI::Range(100, 10000));
  };

  auto* bench = app.add_subcommand("bench", "time the four benchmark tasks per backend");
  add_common(bench);
  bench->add_option("--repetitions", cfg.repetitions, "timed runs per task")->check(CLI::PositiveNumber);
  auto* gmm = app.add_subcommand("demo-gmm", "Gaussian mixture log-density map");
  auto* knn = app.add_subcommand("demo-knn", "k-nearest-neighbours decision boundary");
  auto* sgd = app.add_subcommand("demo-sgd", "perceptron and SGD-SVM decision boundaries");
  for (auto* sub : {gmm, knn, sgd}) {
    add_common(sub);
    add_figure(sub);
  }
  auto* matinfo = app.add_subcommand("matinfo", "list compute devices and the active backend");
  matinfo->add_option("--backend", backend_flag, "seq, parallel or auto")
      ->check(CLI::IsMember({"seq", "parallel", "auto"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitConfig;
  }

  try {
    if (!backend_flag.empty()) cfg.backend = backend::parse_backend(backend_flag);
    cfg.command = app.get_subcommands().front()->get_name();
    if (cfg.command == "bench") return cli::cmd_bench(cfg, std::cout);
    if (cfg.command == "matinfo") return cli::cmd_matinfo(cfg, std::cout);
    return cli::cmd_demo(cfg, std::cout);
  } catch (const ConfigurationError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ArgumentError& e) {
    std::cerr << "argument error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("matcha_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Runs the CLI with `args` and optional environment assignments.
  Result run(const std::string& args, const std::string& env = "") const {
    const auto out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = "env -u MATCHA_BACKEND -u MATCHA_DISPATCH_THRESHOLD -u MATCHA_DEVICES " + env + " '" +
                            std::string(MATCHA_CLI_PATH) + "' " + args + " > '" + out.string() + "' 2> '" +
                            err.string() + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, NoCommandIsAUsageError) {
  const auto r = run("");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bench"), std::string::npos);
}

TEST_F(Cli, HelpExitsZero) {
  const auto r = run("--help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("demo-gmm"), std::string::npos);
}

TEST_F(Cli, UnknownFlagsAndValuesAreUsageErrors) {
  EXPECT_EQ(run("bench --frobnicate").code, 2);
  EXPECT_EQ(run("bench --backend gpu").code, 2);
  EXPECT_EQ(run("demo-knn --width 10").code, 2);
  EXPECT_EQ(run("nonsense").code, 2);
}

TEST_F(Cli, ZeroRepetitionsIsAUsageError) {
  const auto r = run("bench --repetitions 0 --out '" + (dir_ / "b").string() + "'");
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
  EXPECT_FALSE(fs::exists(dir_ / "b" / "bench.json"));
}

TEST_F(Cli, BadEnvironmentIsAConfigurationError) {
  EXPECT_EQ(run("matinfo", "MATCHA_BACKEND=quantum").code, 2);
  EXPECT_EQ(run("matinfo", "MATCHA_DISPATCH_THRESHOLD=-4").code, 2);
}

TEST_F(Cli, UnwritableOutputDirectoryIsAConfigurationError) {
  std::ofstream(dir_ / "file") << "x";
  EXPECT_EQ(run("demo-knn --out '" + (dir_ / "file" / "sub").string() + "'").code, 2);
}

TEST_F(Cli, WriteFailureIsARuntimeError) {
  fs::create_directories(dir_ / "o" / "knn.svg");
  const auto r = run("demo-knn --backend seq --out '" + (dir_ / "o").string() + "'");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("knn.svg"), std::string::npos);
}

TEST_F(Cli, MatinfoListsDevices) {
  const auto r = run("matinfo --backend seq");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("matcha-parallel-cpu"), std::string::npos);
  EXPECT_NE(r.out.find("selected:"), std::string::npos);
  EXPECT_NE(r.out.find("backend: seq"), std::string::npos);
  const auto p = run("matinfo", "MATCHA_BACKEND=parallel");
  EXPECT_EQ(p.code, 0);
  EXPECT_NE(p.out.find("backend: parallel (parallel active"), std::string::npos);
}

TEST_F(Cli, MatinfoWithoutDevices) {
  EXPECT_EQ(run("matinfo", "MATCHA_DEVICES=none").code, 2);
  EXPECT_EQ(run("matinfo --backend seq", "MATCHA_DEVICES=none").code, 2);
}

TEST_F(Cli, BenchSequentialColumn) {
  const auto out = dir_ / "bench";
  const auto r = run("bench --backend seq --repetitions 1 --seed 3 --out '" + out.string() + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("seq mean ms"), std::string::npos);
  EXPECT_EQ(r.out.find("parallel mean ms"), std::string::npos);
  const auto j = nlohmann::json::parse(slurp(out / "bench.json"));
  ASSERT_EQ(j["tasks"].size(), 4u);
  for (const auto& t : j["tasks"]) {
    EXPECT_EQ(t["backend"], "seq");
    EXPECT_EQ(t["times_ms"].size(), 1u);
  }
}

TEST_F(Cli, BenchWithoutParallelDeviceDegrades) {
  const auto out = dir_ / "bench";
  const auto r = run("bench --repetitions 1 --out '" + out.string() + "'", "MATCHA_DEVICES=none");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("backend parallel unavailable"), std::string::npos);
  const auto j = nlohmann::json::parse(slurp(out / "bench.json"));
  EXPECT_EQ(j["tasks"].size(), 4u);
  EXPECT_EQ(j["unavailable"].size(), 1u);
}

TEST_F(Cli, DemosWriteTheirFiles) {
  for (const std::string cmd : {"demo-gmm", "demo-knn", "demo-sgd"}) {
    const auto out = dir_ / cmd;
    const auto r = run(cmd + " --backend seq --out '" + out.string() + "'");
    ASSERT_EQ(r.code, 0) << cmd << ": " << r.err;
    const std::string stem = cmd.substr(5);
    const auto svg = slurp(out / (stem + ".svg"));
    EXPECT_EQ(support::xml_problem(svg), "") << cmd;
    EXPECT_NE(r.out.find(stem + ".svg"), std::string::npos);
  }
  EXPECT_TRUE(fs::exists(dir_ / "demo-gmm" / "gmm_model.json"));
  EXPECT_TRUE(fs::exists(dir_ / "demo-knn" / "knn_model.json"));
  EXPECT_TRUE(fs::exists(dir_ / "demo-sgd" / "sgd_perceptron_model.json"));
  EXPECT_TRUE(fs::exists(dir_ / "demo-sgd" / "sgd_svm_model.json"));
  const auto gmm = slurp(dir_ / "demo-gmm" / "gmm.svg");
  EXPECT_NE(gmm.find("<g class=\"colorbar\""), std::string::npos);
  EXPECT_NE(gmm.find("<g class=\"pcolor\""), std::string::npos);
  EXPECT_GE(support::count(gmm, "<path"), 1u);
  const auto knn = slurp(dir_ / "demo-knn" / "knn.svg");
  EXPECT_EQ(support::count(knn, "<g class=\"contour\""), 1u);
  EXPECT_NE(knn.find("data-level=\"1.5\""), std::string::npos);
  const auto sgd = slurp(dir_ / "demo-sgd" / "sgd.svg");
  EXPECT_EQ(support::count(sgd, "data-level=\"0\""), 2u);
  EXPECT_EQ(support::count(sgd, "<g class=\"legend-entry\""), 3u);
}

TEST_F(Cli, DemosAreByteIdenticalAcrossRuns) {
  for (const std::string cmd : {"demo-gmm", "demo-knn", "demo-sgd"}) {
    const auto a = dir_ / (cmd + "_a"), b = dir_ / (cmd + "_b");
    ASSERT_EQ(run(cmd + " --backend seq --seed 5 --out '" + a.string() + "'").code, 0);
    ASSERT_EQ(run(cmd + " --seed 5 --out '" + b.string() + "'", "MATCHA_BACKEND=seq").code, 0);
    for (const auto& entry : fs::directory_iterator(a)) {
      const auto name = entry.path().filename();
      EXPECT_EQ(slurp(entry.path()), slurp(b / name)) << cmd << " " << name;
    }
  }
}

TEST_F(Cli, SeedChangesTheFigure) {
  ASSERT_EQ(run("demo-knn --backend seq --seed 1 --out '" + (dir_ / "a").string() + "'").code, 0);
  ASSERT_EQ(run("demo-knn --backend seq --seed 2 --out '" + (dir_ / "b").string() + "'").code, 0);
  EXPECT_NE(slurp(dir_ / "a" / "knn.svg"), slurp(dir_ / "b" / "knn.svg"));
}

TEST_F(Cli, FigureSizeFlags) {
  ASSERT_EQ(run("demo-sgd --backend seq --width 800 --height 300 --out '" + dir_.string() + "'").code, 0);
  const auto svg = slurp(dir_ / "sgd.svg");
  EXPECT_NE(svg.find("width=\"800\" height=\"300\""), std::string::npos);
}

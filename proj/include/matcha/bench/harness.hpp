#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "matcha/backend/runtime.hpp"
#include "matcha/bench/tasks.hpp"
#include "matcha/error.hpp"
#include "matcha/ops.hpp"

namespace matcha::bench {

struct RunOptions {
  std::size_t repetitions = 5;
  std::uint64_t seed = 1;
  std::size_t dispatch_threshold = backend::kDefaultDispatchThreshold;
  // Test hook: stop the clock without fetching results. A device-resident
  // result then raises ProtocolError.
  bool synchronize = true;
};

struct Cell {
  std::string task;
  std::string backend;
  std::vector<double> times_ms;
  double mean_ms = 0.0;
  double checksum = 0.0;
};

struct TimingReport {
  std::string host;
  std::size_t repetitions = 0;
  std::vector<Cell> cells;
  // Backends that could not be opened, with the reason.
  std::vector<std::pair<std::string, std::string>> unavailable;

  const Cell* find(const std::string& task, const std::string& backend) const {
    for (const auto& c : cells)
      if (c.task == task && c.backend == backend) return &c;
    return nullptr;
  }

  // True when both backends ran task3 and the parallel mean exceeded the
  // sequential one.
  bool task3_speedup_violated() const {
    const Cell* s = find("task3", "seq");
    const Cell* p = find("task3", "parallel");
    return s && p && p->mean_ms > s->mean_ms;
  }
};

inline std::string host_description() {
  std::string os =
#if defined(__linux__)
      "linux";
#elif defined(__APPLE__)
      "macos";
#elif defined(_WIN32)
      "windows";
#else
      "unknown-os";
#endif
  return os + ", " + std::to_string(std::max(1u, std::thread::hardware_concurrency())) + " hardware threads";
}

namespace detail {

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double checksum_of(const std::vector<Matrix>& out) {
  double s = 0.0;
  for (const auto& m : out) s += checksum(m);
  return s;
}

inline void check_outputs(const BenchmarkTask& task, const std::vector<Matrix>& out) {
  if (out.size() != task.output_shapes.size()) throw ProtocolError(task.id + " produced the wrong number of results");
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (Shape{out[k].rows(), out[k].cols()} != task.output_shapes[k]) {
      throw ProtocolError(task.id + " result " + std::to_string(k) + " has shape " + shape_string(out[k]));
    }
  }
}

// Milliseconds for one run; inputs are built before the clock starts.
inline double time_once(const BenchmarkTask& task, const Inputs& in, bool synchronize, std::vector<Matrix>* keep) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  std::vector<Matrix> out = task.body(in);
  if (synchronize)
    for (const auto& m : out) (void)m.storage_data();
  const auto t1 = clock::now();
  if (!synchronize) {
    for (const auto& m : out) {
      if (!m.host_current()) {
        throw ProtocolError(task.id + ": the clock stopped while a result was still on the device; "
                            "device results must be downloaded inside the timed region");
      }
    }
  }
  if (keep) *keep = std::move(out);
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

}  // namespace detail

// Times every task on every backend: one untimed warm-up, then
// `repetitions` timed runs on freshly generated inputs. The timed region
// covers uploads, kernels and the download of every result. The checksum is
// taken from the warm-up run, whose inputs depend only on the seed.
inline TimingReport run(const std::vector<BenchmarkTask>& tasks, const std::vector<backend::BackendChoice>& backends,
                        const RunOptions& opts = {}) {
  if (opts.repetitions == 0) throw ConfigurationError("repetitions must be at least 1");
  TimingReport report;
  report.host = host_description();
  report.repetitions = opts.repetitions;
  for (const auto choice : backends) {
    const std::string name = backend::to_string(choice);
    std::optional<backend::ScopedBackend> scope;
    try {
      scope.emplace(backend::RuntimeConfig{choice, opts.dispatch_threshold});
    } catch (const BackendUnavailable& e) {
      report.unavailable.emplace_back(name, e.what());
      continue;
    }
    for (const auto& task : tasks) {
      Cell cell{task.id, name, {}, 0.0, 0.0};
      std::vector<Matrix> warm;
      detail::time_once(task, task.generate(opts.seed), true, &warm);
      detail::check_outputs(task, warm);
      cell.checksum = detail::checksum_of(warm);
      warm.clear();
      for (std::size_t r = 0; r < opts.repetitions; ++r) {
        const Inputs in = task.generate(opts.seed + 1 + r);
        cell.times_ms.push_back(detail::time_once(task, in, opts.synchronize, nullptr));
      }
      cell.mean_ms = detail::mean(cell.times_ms);
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

inline nlohmann::json to_json(const TimingReport& r) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& c : r.cells) {
    tasks.push_back({{"id", c.task}, {"backend", c.backend}, {"mean_ms", c.mean_ms}, {"times_ms", c.times_ms},
                     {"checksum", c.checksum}});
  }
  nlohmann::json unavailable = nlohmann::json::array();
  for (const auto& [b, why] : r.unavailable) unavailable.push_back({{"backend", b}, {"reason", why}});
  return {{"host", r.host},
          {"repetitions", r.repetitions},
          {"tasks", tasks},
          {"unavailable", unavailable},
          {"task3_speedup_violation", r.task3_speedup_violated()}};
}

// Rows are tasks, one mean-time column per backend that ran.
inline std::string format_table(const TimingReport& r) {
  std::vector<std::string> backends, tasks;
  for (const auto& c : r.cells) {
    if (std::find(backends.begin(), backends.end(), c.backend) == backends.end()) backends.push_back(c.backend);
    if (std::find(tasks.begin(), tasks.end(), c.task) == tasks.end()) tasks.push_back(c.task);
  }
  std::ostringstream os;
  char buf[64];
  os << "host: " << r.host << "\nrepetitions: " << r.repetitions << "\n\n";
  std::snprintf(buf, sizeof buf, "%-8s", "task");
  os << buf;
  for (const auto& b : backends) {
    std::snprintf(buf, sizeof buf, " %16s", (b + " mean ms").c_str());
    os << buf;
  }
  std::snprintf(buf, sizeof buf, " %18s\n", "checksum");
  os << buf;
  for (const auto& t : tasks) {
    std::snprintf(buf, sizeof buf, "%-8s", t.c_str());
    os << buf;
    double sum = 0.0;
    for (const auto& b : backends) {
      const Cell* c = r.find(t, b);
      if (c) {
        std::snprintf(buf, sizeof buf, " %16.3f", c->mean_ms);
        sum = c->checksum;
      } else {
        std::snprintf(buf, sizeof buf, " %16s", "-");
      }
      os << buf;
    }
    std::snprintf(buf, sizeof buf, " %18.6e\n", sum);
    os << buf;
  }
  for (const auto& [b, why] : r.unavailable) os << "\nbackend " << b << " unavailable: " << why << "\n";
  if (r.task3_speedup_violated()) {
    os << "\nWARNING: task3 parallel mean exceeds sequential mean (speedup direction violated)\n";
  }
  return os.str();
}

}  // namespace matcha::bench

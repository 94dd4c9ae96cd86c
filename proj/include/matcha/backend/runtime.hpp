#pragma once

#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>

#include "matcha/backend/context.hpp"
#include "matcha/error.hpp"

namespace matcha::backend {

enum class BackendChoice { seq, parallel, automatic };

inline const char* to_string(BackendChoice c) noexcept {
  switch (c) {
    case BackendChoice::seq: return "seq";
    case BackendChoice::parallel: return "parallel";
    case BackendChoice::automatic: return "auto";
  }
  return "?";
}

inline BackendChoice parse_backend(std::string_view text) {
  if (text == "seq") return BackendChoice::seq;
  if (text == "parallel") return BackendChoice::parallel;
  if (text == "auto") return BackendChoice::automatic;
  throw ConfigurationError("unknown backend '" + std::string(text) + "' (expected seq, parallel or auto)");
}

struct RuntimeConfig {
  BackendChoice backend = BackendChoice::automatic;
  std::size_t dispatch_threshold = kDefaultDispatchThreshold;

  // MATCHA_BACKEND and MATCHA_DISPATCH_THRESHOLD.
  static RuntimeConfig from_env() {
    RuntimeConfig cfg;
    if (const char* b = std::getenv("MATCHA_BACKEND"); b && *b) cfg.backend = parse_backend(b);
    if (const char* t = std::getenv("MATCHA_DISPATCH_THRESHOLD"); t && *t) {
      char* end = nullptr;
      const long long v = std::strtoll(t, &end, 10);
      if (*end != '\0' || v < 0) {
        throw ConfigurationError(std::string("MATCHA_DISPATCH_THRESHOLD must be a non-negative integer, got '") + t +
                                 "'");
      }
      cfg.dispatch_threshold = static_cast<std::size_t>(v);
    }
    return cfg;
  }
};

// Process-wide backend state: the selected device's context (created once)
// and whether core operations are routed to it.
class Runtime {
 public:
  static Runtime& instance() {
    static Runtime rt;
    return rt;
  }

  // `parallel` fails when no device can be opened; `auto` falls back to the
  // sequential path.
  void configure(const RuntimeConfig& cfg) {
    config_ = cfg;
    if (cfg.backend == BackendChoice::seq) {
      uninstall_overrides();
      return;
    }
    if (!context_) {
      try {
        context_ = init_context(select_device(enumerate_devices()), ContextOptions{cfg.dispatch_threshold});
      } catch (const Error& e) {
        uninstall_overrides();
        unavailable_reason_ = e.what();
        if (cfg.backend == BackendChoice::parallel) throw BackendUnavailable(unavailable_reason_);
        return;
      }
    }
    context_->set_dispatch_threshold(cfg.dispatch_threshold);
    install_overrides(*context_);
  }

  const RuntimeConfig& config() const noexcept { return config_; }
  bool parallel_active() const { return overrides_installed(); }
  std::optional<ComputeContext>& context() noexcept { return context_; }
  const std::string& unavailable_reason() const noexcept { return unavailable_reason_; }

 private:
  Runtime() = default;
  RuntimeConfig config_{BackendChoice::seq, kDefaultDispatchThreshold};
  std::optional<ComputeContext> context_;
  std::string unavailable_reason_;
};

// Library initialisation from the environment; runs once per process.
inline Runtime& initialize() {
  static const bool done = [] {
    Runtime::instance().configure(RuntimeConfig::from_env());
    return true;
  }();
  (void)done;
  return Runtime::instance();
}

// Switches the backend for a scope and restores the previous choice.
class ScopedBackend {
 public:
  explicit ScopedBackend(RuntimeConfig cfg) : previous_(Runtime::instance().config()) {
    Runtime::instance().configure(cfg);
  }
  explicit ScopedBackend(BackendChoice choice, std::size_t threshold = kDefaultDispatchThreshold)
      : ScopedBackend(RuntimeConfig{choice, threshold}) {}
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;
  ~ScopedBackend() {
    try {
      Runtime::instance().configure(previous_);
    } catch (...) {
    }
  }

 private:
  RuntimeConfig previous_;
};

}  // namespace matcha::backend

#pragma once

#include <algorithm>
#include <cstdlib>
#include <string_view>
#include <cstddef>
#include <string>
#include <thread>
#include <vector>

#include "matcha/error.hpp"

namespace matcha::backend {

enum class DeviceKind { gpu, cpu };

inline const char* to_string(DeviceKind k) noexcept { return k == DeviceKind::gpu ? "gpu" : "cpu"; }

struct DeviceDescriptor {
  std::string platform_name;
  DeviceKind device_kind = DeviceKind::cpu;
  std::size_t device_index = 0;
  std::size_t max_parallel_units = 1;

  friend bool operator==(const DeviceDescriptor&, const DeviceDescriptor&) = default;
};

inline constexpr const char* kCpuPlatform = "matcha-parallel-cpu";

// Execution targets visible to this process, GPUs first. No GPU driver is
// linked, so the list is the multi-core CPU target alone. MATCHA_DEVICES=none
// hides every device.
inline std::vector<DeviceDescriptor> enumerate_devices() {
  if (const char* v = std::getenv("MATCHA_DEVICES"); v && std::string_view(v) == "none") return {};
  const std::size_t units = std::max(1u, std::thread::hardware_concurrency());
  return {DeviceDescriptor{kCpuPlatform, DeviceKind::cpu, 0, units}};
}

// Any GPU beats any CPU; within a kind, the first one listed wins.
inline DeviceDescriptor select_device(const std::vector<DeviceDescriptor>& devices) {
  if (devices.empty()) throw ConfigurationError("no compute device to select from");
  for (const auto& d : devices)
    if (d.device_kind == DeviceKind::gpu) return d;
  return devices.front();
}

}  // namespace matcha::backend

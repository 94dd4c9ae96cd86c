#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <new>
#include <sstream>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "matcha/backend/command_queue.hpp"
#include "matcha/backend/device.hpp"
#include "matcha/backend/map_compiler.hpp"
#include "matcha/backend/thread_pool.hpp"
#include "matcha/error.hpp"
#include "matcha/matrix.hpp"
#include "matcha/ops.hpp"

namespace matcha::backend {

inline constexpr std::size_t kDefaultDispatchThreshold = 4096;

struct BackendStats {
  std::size_t uploads = 0;           // host -> device copies
  std::size_t downloads = 0;         // device -> host copies
  std::size_t synchronizations = 0;  // times the host waited on the queue
  std::size_t kernels_compiled = 0;
  std::size_t kernels_enqueued = 0;
};

enum class ArgKind { matrix, scalar };

// A matrix argument as a kernel sees it. `out` is set only for the output.
struct BufferView {
  const float* data = nullptr;
  float* out = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool row_major = true;

  float at(std::size_t i, std::size_t j) const noexcept { return data[row_major ? i * cols + j : j * rows + i]; }
  InputView as_input() const noexcept { return {data, rows, cols, row_major}; }
};

struct LaunchArgs {
  std::vector<BufferView> matrices;  // output last
  std::vector<float> scalars;

  const BufferView& output() const { return matrices.back(); }
};

// Work-items [begin, end) of one launch. Items past the output size must be
// ignored by the body.
using KernelBody = std::function<void(const LaunchArgs&, std::size_t, std::size_t)>;

struct Kernel {
  std::string name;
  std::string source;
  std::vector<ArgKind> signature;  // last entry is the output matrix
  KernelBody body;
  std::size_t grain = 4096;
  std::shared_ptr<const MapProgram> program;  // set for map kernels

  std::size_t arity() const noexcept { return signature.size(); }
};

using KernelHandle = std::shared_ptr<const Kernel>;
using KernelArg = std::variant<Matrix, float>;

struct ContextOptions {
  std::size_t dispatch_threshold = kDefaultDispatchThreshold;
  std::size_t device_memory_limit = std::numeric_limits<std::size_t>::max();  // bytes
  std::size_t threads = 0;  // 0: the device's parallel units
};

class ComputeContext;
class MapKernel;

namespace detail {

// Cache key: name, hash of the source, then the source itself so that a hash
// collision can never alias two kernels.
inline std::string source_key(const std::string& name, const std::string& source) {
  std::ostringstream os;
  os << name << '#' << std::hex << std::hash<std::string>{}(source) << '#' << source;
  return os.str();
}

inline const char* op_symbol(ElementOp op) noexcept {
  switch (op) {
    case ElementOp::add: return "+";
    case ElementOp::sub: return "-";
    case ElementOp::mul: return "*";
    case ElementOp::div: return "/";
  }
  return "?";
}

inline KernelBody map_body(std::shared_ptr<const MapProgram> program) {
  return [program = std::move(program)](const LaunchArgs& args, std::size_t begin, std::size_t end) {
    const BufferView& out = args.output();
    end = std::min(end, out.rows * out.cols);
    if (begin >= end) return;
    std::vector<InputView> inputs;
    inputs.reserve(args.matrices.size() - 1);
    for (std::size_t k = 0; k + 1 < args.matrices.size(); ++k) inputs.push_back(args.matrices[k].as_input());
    program->run(inputs, out.out, begin, end);
  };
}

inline KernelBody broadcast_body(ElementOp op) {
  return [op](const LaunchArgs& args, std::size_t begin, std::size_t end) {
    const BufferView& a = args.matrices[0];
    const BufferView& b = args.matrices[1];
    const BufferView& out = args.output();
    end = std::min(end, out.rows * out.cols);
    for (std::size_t idx = begin; idx < end; ++idx) {
      const std::size_t i = idx / out.cols, j = idx % out.cols;
      out.out[idx] = apply(op, a.at(i, j), b.at(i, 0));
    }
  };
}

// One work-item per output element. Each output row segment is accumulated
// in doubles over k in ascending order, which reproduces the sequential
// reference bit for bit while streaming rows of B.
inline void matmul_body(const LaunchArgs& args, std::size_t begin, std::size_t end) {
  const BufferView& a = args.matrices[0];
  const BufferView& b = args.matrices[1];
  const BufferView& out = args.output();
  const std::size_t m = out.cols, inner = a.cols;
  end = std::min(end, out.rows * m);
  std::vector<double> acc;
  for (std::size_t idx = begin; idx < end;) {
    const std::size_t row = idx / m;
    const std::size_t c0 = idx % m;
    const std::size_t c1 = std::min(m, c0 + (end - idx));
    const std::size_t w = c1 - c0;
    acc.assign(w, 0.0);
    for (std::size_t k = 0; k < inner; ++k) {
      const double av = a.at(row, k);
      if (b.row_major) {
        const float* brow = b.data + k * m + c0;
        for (std::size_t j = 0; j < w; ++j) acc[j] += av * static_cast<double>(brow[j]);
      } else {
        const float* bcol = b.data + c0 * b.rows + k;
        for (std::size_t j = 0; j < w; ++j) acc[j] += av * static_cast<double>(bcol[j * b.rows]);
      }
    }
    float* o = out.out + row * m + c0;
    for (std::size_t j = 0; j < w; ++j) o[j] = static_cast<float>(acc[j]);
    idx += w;
  }
}

class ContextState : public matcha::detail::DeviceOwner, public std::enable_shared_from_this<ContextState> {
 public:
  ContextState(DeviceDescriptor device, ContextOptions opts)
      : device_(std::move(device)),
        options_(opts),
        pool_(opts.threads ? opts.threads : device_.max_parallel_units) {}

  ~ContextState() override {
    try {
      queue_.finish();
    } catch (...) {
    }
  }

  const DeviceDescriptor& device() const noexcept { return device_; }
  const ContextOptions& options() const noexcept { return options_; }
  void set_threshold(std::size_t t) noexcept { options_.dispatch_threshold = t; }
  std::size_t threads() const noexcept { return pool_.size(); }
  std::size_t bytes_in_use() const noexcept { return *ledger_; }
  std::size_t pending() const { return queue_.pending(); }

  BackendStats stats() const {
    std::lock_guard lk(stats_mutex_);
    return stats_;
  }
  void reset_stats() {
    std::lock_guard lk(stats_mutex_);
    stats_ = {};
  }

  std::size_t cached_kernels() const {
    std::lock_guard lk(cache_mutex_);
    return cache_.size();
  }

  KernelHandle compile(const std::string& name, const std::string& source, std::vector<ArgKind> signature,
                       const std::function<KernelBody()>& build, std::size_t grain,
                       std::shared_ptr<const MapProgram> program = nullptr) {
    const auto key = source_key(name, source);
    std::lock_guard lk(cache_mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    auto k = std::make_shared<Kernel>(Kernel{name, source, std::move(signature), build(), grain, std::move(program)});
    cache_.emplace(key, k);
    bump(&BackendStats::kernels_compiled);
    return k;
  }

  KernelHandle compile_map(const std::string& expression, std::size_t arity) {
    const std::string name = "map" + std::to_string(arity);
    {
      std::lock_guard lk(cache_mutex_);
      if (auto it = cache_.find(source_key(name, expression)); it != cache_.end()) return it->second;
    }
    auto program = compile_program(expression, arity);  // throws before anything is cached
    std::vector<ArgKind> sig(arity + 1, ArgKind::matrix);
    return compile(name, expression, std::move(sig), [&] { return map_body(program); }, 4096, program);
  }

  KernelHandle builtin(const std::string& name) const {
    std::lock_guard lk(cache_mutex_);
    return builtins_.at(name);
  }

  void register_builtins() {
    const std::vector<ArgKind> binary{ArgKind::matrix, ArgKind::matrix, ArgKind::matrix};
    for (auto op : {ElementOp::add, ElementOp::sub, ElementOp::mul, ElementOp::div}) {
      const std::string expr = std::string("a[i] ") + op_symbol(op) + " b[i]";
      auto program = compile_program(expr, 2);
      builtins_[to_string(op)] =
          compile(to_string(op), expr, binary, [&] { return map_body(program); }, 4096, program);
      const std::string bname = std::string("broadcast_") + to_string(op);
      builtins_[bname] = compile(
          bname, std::string("out[i] = a[i] ") + op_symbol(op) + " b[i / cols]", binary,
          [op] { return broadcast_body(op); }, 4096);
    }
    builtins_["matmul"] = compile(
        "matmul", "out[r,c] = sum_k (double)a[r,k] * b[k,c]", binary, [] { return KernelBody(matmul_body); }, 1024);
  }

  void upload(const Matrix& a) {
    if (a.empty()) throw DimensionError("cannot upload an empty matrix");
    auto& s = *a.storage();
    if (s.device && owned(s)) {
      s.residency = Residency::device;
      return;
    }
    s.ensure_host();
    auto buf = allocate_buffer(s.host.size());
    std::copy(s.host.begin(), s.host.end(), buf->data.get());
    s.device = std::move(buf);
    s.owner = weak_from_this();
    s.residency = Residency::device;
    bump(&BackendStats::uploads);
  }

  void download(const Matrix& a) {
    if (a.empty()) return;
    auto& s = *a.storage();
    if (s.residency == Residency::host) return;
    if (!s.host_valid) {
      s.ensure_host();  // routed to whichever context owns the buffer
    } else {
      s.residency = Residency::host;
    }
  }

  void read_back(matcha::detail::Storage& s) override {
    synchronize();
    s.host.assign(s.device->data.get(), s.device->data.get() + s.device->size);
    s.host_valid = true;
    s.residency = Residency::host;
    bump(&BackendStats::downloads);
  }

  Matrix allocate(std::size_t rows, std::size_t cols) {
    const std::size_t n = Matrix::checked_size(rows, cols);
    auto s = std::make_shared<matcha::detail::Storage>();
    s->device = allocate_buffer(n);
    std::fill_n(s->device->data.get(), n, 0.0f);
    s->host_valid = false;
    s->residency = Residency::device;
    s->owner = weak_from_this();
    return Matrix::adopt(rows, cols, std::move(s));
  }

  void execute(const KernelHandle& kernel, const std::vector<KernelArg>& args, std::size_t global_size) {
    if (!kernel) throw ArgumentError("null kernel");
    if (args.size() != kernel->arity()) {
      throw ArgumentError("kernel '" + kernel->name + "' takes " + std::to_string(kernel->arity()) +
                          " arguments, got " + std::to_string(args.size()));
    }
    for (std::size_t k = 0; k < args.size(); ++k) {
      const bool is_matrix = std::holds_alternative<Matrix>(args[k]);
      if (is_matrix != (kernel->signature[k] == ArgKind::matrix)) {
        throw ArgumentError("argument " + std::to_string(k) + " of kernel '" + kernel->name + "' must be a " +
                            (kernel->signature[k] == ArgKind::matrix ? "matrix" : "scalar"));
      }
      if (is_matrix && std::get<Matrix>(args[k]).empty()) {
        throw ArgumentError("argument " + std::to_string(k) + " is an empty matrix");
      }
    }
    const Matrix& out = std::get<Matrix>(args.back());
    if (!out.row_major()) throw ArgumentError("kernel output must be row-major");
    if (global_size < out.size()) {
      throw ArgumentError("global size " + std::to_string(global_size) + " is smaller than the output (" +
                          std::to_string(out.size()) + " elements)");
    }

    LaunchArgs launch;
    std::vector<std::shared_ptr<matcha::detail::DeviceBuffer>> keep;
    for (std::size_t k = 0; k + 1 < args.size(); ++k) {
      if (const auto* f = std::get_if<float>(&args[k])) {
        launch.scalars.push_back(*f);
        continue;
      }
      const Matrix& m = std::get<Matrix>(args[k]);
      upload(m);
      keep.push_back(m.storage()->device);
      launch.matrices.push_back({keep.back()->data.get(), nullptr, m.rows(), m.cols(), m.row_major()});
    }

    auto& os = *out.storage();
    // Reuse the output buffer only if no queued kernel can still read it.
    std::shared_ptr<matcha::detail::DeviceBuffer> target;
    if (os.device && owned(os) && os.device.use_count() == 1 && os.device->size == out.size()) {
      target = os.device;
    } else {
      target = allocate_buffer(out.size());
    }
    os.device = target;
    os.owner = weak_from_this();
    os.host_valid = false;
    os.host.clear();
    os.residency = Residency::device;
    keep.push_back(target);
    launch.matrices.push_back({target->data.get(), target->data.get(), out.rows(), out.cols(), true});

    bump(&BackendStats::kernels_enqueued);
    queue_.submit([this, kernel, launch = std::move(launch), keep = std::move(keep), global_size] {
      pool_.parallel_for(global_size, kernel->grain,
                         [&](std::size_t b, std::size_t e) { kernel->body(launch, b, e); });
    });
  }

  void synchronize() {
    bump(&BackendStats::synchronizations);
    try {
      queue_.finish();
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw BackendError(std::string("device execution failed: ") + e.what());
    }
  }

 private:
  bool owned(const matcha::detail::Storage& s) const { return s.owner.lock().get() == this; }

  std::shared_ptr<matcha::detail::DeviceBuffer> allocate_buffer(std::size_t n) {
    const std::size_t bytes = n * sizeof(float);
    const std::size_t used = ledger_->fetch_add(bytes) + bytes;
    if (used > options_.device_memory_limit) {
      ledger_->fetch_sub(bytes);
      throw BackendError("device buffer allocation of " + std::to_string(bytes) + " bytes exceeds the " +
                         std::to_string(options_.device_memory_limit) + "-byte device memory");
    }
    try {
      return std::make_shared<matcha::detail::DeviceBuffer>(n, ledger_);
    } catch (const std::bad_alloc&) {
      ledger_->fetch_sub(bytes);
      throw BackendError("device buffer allocation of " + std::to_string(bytes) + " bytes failed");
    }
  }

  void bump(std::size_t BackendStats::*field) {
    std::lock_guard lk(stats_mutex_);
    ++(stats_.*field);
  }

  DeviceDescriptor device_;
  ContextOptions options_;
  std::shared_ptr<std::atomic<std::size_t>> ledger_ = std::make_shared<std::atomic<std::size_t>>(0);
  mutable std::mutex stats_mutex_;
  BackendStats stats_;
  mutable std::mutex cache_mutex_;
  std::unordered_map<std::string, KernelHandle> cache_;
  std::unordered_map<std::string, KernelHandle> builtins_;
  ThreadPool pool_;
  CommandQueue queue_;  // declared after the pool: drains before the pool stops
};

}  // namespace detail

// Device + command queue + kernel cache. Copies are handles to the same
// context. One coordinating thread at a time may submit work.
class ComputeContext {
 public:
  // Creates the context for `device` and compiles the built-in kernels.
  // Throws BackendUnavailable when the device cannot be opened.
  static ComputeContext create(const DeviceDescriptor& device, ContextOptions opts = {}) {
    const auto available = enumerate_devices();
    const bool present = std::any_of(available.begin(), available.end(), [&](const DeviceDescriptor& d) {
      return d.platform_name == device.platform_name && d.device_kind == device.device_kind &&
             d.device_index == device.device_index;
    });
    if (!present) {
      throw BackendUnavailable("device " + device.platform_name + "/" + to_string(device.device_kind) + "#" +
                               std::to_string(device.device_index) + " is not available");
    }
    ComputeContext ctx;
    try {
      ctx.state_ = std::make_shared<detail::ContextState>(device, opts);
      ctx.state_->register_builtins();
    } catch (const std::system_error& e) {
      throw BackendUnavailable(std::string("could not start device workers: ") + e.what());
    }
    return ctx;
  }

  const DeviceDescriptor& device() const noexcept { return state_->device(); }
  std::size_t threads() const noexcept { return state_->threads(); }
  std::size_t dispatch_threshold() const noexcept { return state_->options().dispatch_threshold; }
  void set_dispatch_threshold(std::size_t t) noexcept { state_->set_threshold(t); }

  BackendStats stats() const { return state_->stats(); }
  void reset_stats() { state_->reset_stats(); }
  std::size_t cached_kernels() const { return state_->cached_kernels(); }
  std::size_t pending() const { return state_->pending(); }
  std::size_t device_bytes_in_use() const noexcept { return state_->bytes_in_use(); }

  KernelHandle builtin(const std::string& name) const { return state_->builtin(name); }

  // Registers (or fetches from the cache) a native kernel.
  KernelHandle compile(const std::string& name, const std::string& source, std::vector<ArgKind> signature,
                       KernelBody body, std::size_t grain = 4096) {
    return state_->compile(name, source, std::move(signature), [&] { return body; }, grain);
  }

  KernelHandle compile_map(const std::string& expression, std::size_t arity) {
    return state_->compile_map(expression, arity);
  }

  void upload(const Matrix& a) { state_->upload(a); }
  void download(const Matrix& a) { state_->download(a); }

  // Device-resident, zero-filled.
  Matrix allocate(std::size_t rows, std::size_t cols) { return state_->allocate(rows, cols); }

  // Enqueues and returns at once. Matrix inputs are uploaded on demand; the
  // output (last argument) becomes device-resident with a stale host copy.
  void execute(const KernelHandle& kernel, const std::vector<KernelArg>& args, std::size_t global_size) {
    state_->execute(kernel, args, global_size);
  }

  Matrix elementwise(ElementOp op, const Matrix& a, const Matrix& b) {
    check_elementwise_shapes(a, b);
    const bool broadcast = is_column_broadcast(a, b);
    Matrix out = allocate(a.rows(), a.cols());
    execute(builtin(broadcast ? std::string("broadcast_") + to_string(op) : to_string(op)), {a, b, out}, out.size());
    return out;
  }

  Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.empty() || b.empty()) throw DimensionError("matmul on an empty matrix");
    if (a.cols() != b.rows()) {
      throw ShapeError("matmul inner dimensions differ: " + shape_string(a) + " * " + shape_string(b));
    }
    Matrix out = allocate(a.rows(), b.cols());
    execute(builtin("matmul"), {a, b, out}, out.size());
    return out;
  }

  MapKernel map_generator(const std::string& expression, std::size_t arity);

  bool same_as(const ComputeContext& other) const noexcept { return state_ == other.state_; }

 private:
  std::shared_ptr<detail::ContextState> state_;
};

// An elementwise expression compiled once and applied to any number of
// same-shaped matrices. Without a context it evaluates on the host.
class MapKernel {
 public:
  MapKernel(std::shared_ptr<const MapProgram> program, std::optional<ComputeContext> ctx, KernelHandle kernel)
      : program_(std::move(program)), ctx_(std::move(ctx)), kernel_(std::move(kernel)) {}

  std::size_t arity() const noexcept { return program_->arity(); }
  const std::string& expression() const noexcept { return program_->source(); }

  Matrix operator()(const std::vector<Matrix>& inputs) const {
    if (inputs.size() != arity()) {
      throw ArgumentError("map kernel takes " + std::to_string(arity()) + " input(s), got " +
                          std::to_string(inputs.size()));
    }
    for (const auto& m : inputs) {
      if (m.empty()) throw DimensionError("map kernel input is empty");
      if (m.rows() != inputs[0].rows() || m.cols() != inputs[0].cols()) {
        throw ShapeError("map kernel inputs must share a shape: " + shape_string(inputs[0]) + " vs " +
                         shape_string(m));
      }
    }
    const std::size_t n = inputs[0].size();
    if (ctx_ && n >= ctx_->dispatch_threshold()) {
      auto ctx = *ctx_;
      Matrix out = ctx.allocate(inputs[0].rows(), inputs[0].cols());
      std::vector<KernelArg> args(inputs.begin(), inputs.end());
      args.emplace_back(out);
      ctx.execute(kernel_, args, n);
      return out;
    }
    std::vector<InputView> views;
    for (const auto& m : inputs) views.push_back({m.storage_data().data(), m.rows(), m.cols(), m.row_major()});
    std::vector<float> out(n);
    program_->run(views, out.data(), 0, n);
    return Matrix(inputs[0].rows(), inputs[0].cols(), std::move(out));
  }

  template <typename... M>
  Matrix operator()(const Matrix& first, const M&... rest) const {
    return (*this)(std::vector<Matrix>{first, rest...});
  }

 private:
  std::shared_ptr<const MapProgram> program_;
  std::optional<ComputeContext> ctx_;
  KernelHandle kernel_;
};

inline MapKernel ComputeContext::map_generator(const std::string& expression, std::size_t arity) {
  auto kernel = compile_map(expression, arity);
  return MapKernel(kernel->program, *this, kernel);
}

// Host-only map kernel.
inline MapKernel compile_map(const std::string& expression, std::size_t arity) {
  return MapKernel(compile_program(expression, arity), std::nullopt, nullptr);
}

inline ComputeContext init_context(const DeviceDescriptor& device, ContextOptions opts = {}) {
  return ComputeContext::create(device, opts);
}

inline MapKernel map_generator(ComputeContext& ctx, const std::string& expression, std::size_t arity) {
  return ctx.map_generator(expression, arity);
}

namespace detail {

class ContextAccelerator final : public matcha::detail::Accelerator {
 public:
  explicit ContextAccelerator(ComputeContext ctx) : ctx_(std::move(ctx)) {}
  std::size_t threshold() const noexcept override { return ctx_.dispatch_threshold(); }
  Matrix elementwise(ElementOp op, const Matrix& a, const Matrix& b) override { return ctx_.elementwise(op, a, b); }
  Matrix matmul(const Matrix& a, const Matrix& b) override { return ctx_.matmul(a, b); }
  const ComputeContext& context() const noexcept { return ctx_; }

 private:
  ComputeContext ctx_;
};

}  // namespace detail

// Routes core elementwise and matmul calls at or above the context's
// dispatch threshold to the context.
inline void install_overrides(const ComputeContext& ctx) {
  matcha::detail::accelerator_slot() = std::make_shared<detail::ContextAccelerator>(ctx);
}

inline void uninstall_overrides() { matcha::detail::accelerator_slot().reset(); }

inline bool overrides_installed() { return matcha::detail::accelerator_slot() != nullptr; }

}  // namespace matcha::backend

#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "matcha/error.hpp"
#include "matcha/rng.hpp"

namespace matcha {

enum class Residency { host, device };

namespace detail {

struct Storage;

// Memory owned by a compute device. Buffers are written once by the kernel
// that produces them (or by the upload that creates them) and are read-only
// afterwards, so pending kernels can keep them alive without locking.
struct DeviceBuffer {
  DeviceBuffer(std::size_t n, std::shared_ptr<std::atomic<std::size_t>> ledger)
      : data(new float[n]), size(n), ledger_(std::move(ledger)) {}
  DeviceBuffer(const DeviceBuffer&) = delete;
  DeviceBuffer& operator=(const DeviceBuffer&) = delete;
  ~DeviceBuffer() {
    if (ledger_) ledger_->fetch_sub(size * sizeof(float), std::memory_order_relaxed);
  }

  std::unique_ptr<float[]> data;
  std::size_t size;

 private:
  // bytes in use on the owning device
  std::shared_ptr<std::atomic<std::size_t>> ledger_;
};

// Implemented by the compute backend; the matrix type only needs to ask for
// a stale host copy to be refreshed.
class DeviceOwner {
 public:
  virtual ~DeviceOwner() = default;
  virtual void read_back(Storage& storage) = 0;
};

struct Storage {
  // May be empty while host_valid is false.
  std::vector<float> host;
  // false while a device kernel owns the newest values
  bool host_valid = true;
  Residency residency = Residency::host;
  std::shared_ptr<DeviceBuffer> device;
  std::weak_ptr<DeviceOwner> owner;

  void ensure_host() {
    if (host_valid) return;
    if (auto o = owner.lock()) {
      o->read_back(*this);
    } else {
      // The owning context drains its queue before it goes away, so the
      // buffer is complete.
      host.assign(device->data.get(), device->data.get() + device->size);
      host_valid = true;
      residency = Residency::host;
    }
  }
};

}  // namespace detail

// Dense single-precision matrix backed by one flat buffer.
//
// The buffer is interpreted row-major or column-major according to a flag,
// which makes transpose O(1): the transposed matrix shares the buffer and
// flips the flag. Copies are cheap and share storage too; `set` detaches a
// private buffer first, so sharing is never observable through values.
class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols) : Matrix(rows, cols, std::vector<float>(checked_size(rows, cols), 0.0f)) {}

  // `data` is row-major.
  Matrix(std::size_t rows, std::size_t cols, std::vector<float> data) : rows_(rows), cols_(cols) {
    if (data.size() != checked_size(rows, cols)) {
      throw DimensionError("buffer holds " + std::to_string(data.size()) + " values, expected " +
                           std::to_string(rows * cols));
    }
    storage_ = std::make_shared<detail::Storage>();
    storage_->host = std::move(data);
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return rows_ * cols_; }
  bool empty() const noexcept { return storage_ == nullptr; }
  bool row_major() const noexcept { return row_major_; }
  bool is_column() const noexcept { return cols_ == 1; }

  std::size_t offset(std::size_t i, std::size_t j) const noexcept {
    return row_major_ ? i * cols_ + j : j * rows_ + i;
  }

  float get(std::size_t i, std::size_t j) const {
    check_index(i, j);
    storage_->ensure_host();
    return storage_->host[offset(i, j)];
  }

  void set(std::size_t i, std::size_t j, float v) {
    check_index(i, j);
    storage_->ensure_host();
    if (storage_.use_count() > 1) {
      auto own = std::make_shared<detail::Storage>();
      own->host = storage_->host;
      storage_ = std::move(own);
    }
    storage_->host[offset(i, j)] = v;
    storage_->device.reset();
    storage_->residency = Residency::host;
  }

  // Shares this matrix's buffer; no element is copied.
  Matrix t() const {
    Matrix r = *this;
    r.rows_ = cols_;
    r.cols_ = rows_;
    r.row_major_ = !row_major_;
    return r;
  }

  Residency residency() const noexcept { return storage_ ? storage_->residency : Residency::host; }
  bool host_current() const noexcept { return !storage_ || storage_->host_valid; }

  bool shares_storage_with(const Matrix& other) const noexcept {
    return storage_ != nullptr && storage_ == other.storage_;
  }

  // Identifies the underlying buffer; identical for all views of it.
  const void* storage_id() const noexcept { return storage_.get(); }

  // Raw buffer in storage order (see row_major()). Refreshes a stale host copy.
  std::span<const float> storage_data() const {
    if (!storage_) return {};
    storage_->ensure_host();
    return storage_->host;
  }

  // Copy of the elements in row-major order.
  std::vector<float> to_vector() const {
    auto raw = storage_data();
    if (row_major_) return {raw.begin(), raw.end()};
    std::vector<float> out(size());
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) out[i * cols_ + j] = raw[j * rows_ + i];
    return out;
  }

  // Backend access.
  const std::shared_ptr<detail::Storage>& storage() const noexcept { return storage_; }

  static Matrix adopt(std::size_t rows, std::size_t cols, std::shared_ptr<detail::Storage> storage) {
    Matrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.storage_ = std::move(storage);
    return m;
  }

  static std::size_t checked_size(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) {
      throw DimensionError("matrix dimensions must be positive, got " + std::to_string(rows) + "x" +
                           std::to_string(cols));
    }
    return rows * cols;
  }

 private:
  void check_index(std::size_t i, std::size_t j) const {
    if (i >= rows_ || j >= cols_) {
      throw IndexError("index (" + std::to_string(i) + "," + std::to_string(j) + ") out of range for " +
                       std::to_string(rows_) + "x" + std::to_string(cols_) + " matrix");
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  bool row_major_ = true;
  std::shared_ptr<detail::Storage> storage_;
};

inline Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }

inline Matrix identity(std::size_t n) {
  Matrix::checked_size(n, n);
  std::vector<float> d(n * n, 0.0f);
  for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 1.0f;
  return Matrix(n, n, std::move(d));
}

template <typename T>
Matrix from_array(const std::vector<std::vector<T>>& nested) {
  if (nested.empty() || nested.front().empty()) throw DimensionError("from_array needs at least one non-empty row");
  const std::size_t cols = nested.front().size();
  std::vector<float> data;
  data.reserve(nested.size() * cols);
  for (std::size_t i = 0; i < nested.size(); ++i) {
    if (nested[i].size() != cols) {
      throw ShapeError("ragged input: row " + std::to_string(i) + " has " + std::to_string(nested[i].size()) +
                       " values, row 0 has " + std::to_string(cols));
    }
    for (const auto& v : nested[i]) data.push_back(static_cast<float>(v));
  }
  return Matrix(nested.size(), cols, std::move(data));
}

inline Matrix from_array(std::initializer_list<std::initializer_list<double>> nested) {
  std::vector<std::vector<double>> rows;
  for (auto r : nested) rows.emplace_back(r);
  return from_array(rows);
}

// i.i.d. uniform [0,1); identical seeds give bit-identical matrices.
inline Matrix random(std::size_t rows, std::size_t cols, std::optional<std::uint64_t> seed = std::nullopt) {
  const std::size_t n = Matrix::checked_size(rows, cols);
  SplitMix64 rng(seed ? *seed : entropy_seed());
  std::vector<float> d(n);
  for (auto& v : d) v = rng.uniform_float();
  return Matrix(rows, cols, std::move(d));
}

}  // namespace matcha

#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace matcha::backend {

// Fixed set of worker threads that split an index range between themselves
// and the calling thread. Chunk boundaries depend only on (n, grain, size()),
// so every run over the same range sees the same partition.
class ThreadPool {
 public:
  using RangeFn = std::function<void(std::size_t, std::size_t)>;

  explicit ThreadPool(std::size_t threads) {
    const std::size_t helpers = threads > 1 ? threads - 1 : 0;
    helpers_.reserve(helpers);
    for (std::size_t t = 0; t < helpers; ++t) helpers_.emplace_back([this] { work(); });
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  ~ThreadPool() {
    {
      std::lock_guard lk(mutex_);
      stop_ = true;
    }
    wake_.notify_all();
    for (auto& t : helpers_) t.join();
  }

  std::size_t size() const noexcept { return helpers_.size() + 1; }

  void parallel_for(std::size_t n, std::size_t grain, const RangeFn& fn) {
    if (n == 0) return;
    grain = std::max<std::size_t>(grain, 1);
    if (helpers_.empty() || n <= grain) {
      fn(0, n);
      return;
    }
    const std::size_t target_chunks = size() * 4;
    std::size_t chunk = (n + target_chunks - 1) / target_chunks;
    chunk = std::max(chunk, grain);
    {
      std::lock_guard lk(mutex_);
      fn_ = &fn;
      n_ = n;
      chunk_ = chunk;
      next_.store(0, std::memory_order_relaxed);
      outstanding_ = helpers_.size();
      ++generation_;
    }
    wake_.notify_all();
    run_chunks();
    std::unique_lock lk(mutex_);
    done_.wait(lk, [this] { return outstanding_ == 0; });
    fn_ = nullptr;
  }

 private:
  void run_chunks() {
    for (;;) {
      const std::size_t begin = next_.fetch_add(chunk_, std::memory_order_relaxed);
      if (begin >= n_) return;
      (*fn_)(begin, std::min(begin + chunk_, n_));
    }
  }

  void work() {
    std::uint64_t seen = 0;
    for (;;) {
      {
        std::unique_lock lk(mutex_);
        wake_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
      }
      run_chunks();
      {
        std::lock_guard lk(mutex_);
        if (--outstanding_ == 0) done_.notify_one();
      }
    }
  }

  std::vector<std::thread> helpers_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  bool stop_ = false;
  std::uint64_t generation_ = 0;
  std::size_t outstanding_ = 0;
  const RangeFn* fn_ = nullptr;
  std::size_t n_ = 0;
  std::size_t chunk_ = 1;
  std::atomic<std::size_t> next_{0};
};

}  // namespace matcha::backend

#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

namespace matcha::backend {

// In-order asynchronous instruction queue. submit() returns immediately;
// finish() blocks until everything submitted so far has run and rethrows the
// first failure, if any.
class CommandQueue {
 public:
  using Instruction = std::function<void()>;

  CommandQueue() : worker_([this] { drain(); }) {}

  CommandQueue(const CommandQueue&) = delete;
  CommandQueue& operator=(const CommandQueue&) = delete;

  ~CommandQueue() {
    {
      std::unique_lock lk(mutex_);
      idle_.wait(lk, [this] { return pending_.empty() && !running_; });
      stop_ = true;
    }
    ready_.notify_one();
    worker_.join();
  }

  void submit(Instruction ins) {
    {
      std::lock_guard lk(mutex_);
      pending_.push_back(std::move(ins));
    }
    ready_.notify_one();
  }

  void finish() {
    std::exception_ptr err;
    {
      std::unique_lock lk(mutex_);
      idle_.wait(lk, [this] { return pending_.empty() && !running_; });
      std::swap(err, failure_);
    }
    if (err) std::rethrow_exception(err);
  }

  std::size_t pending() const {
    std::lock_guard lk(mutex_);
    return pending_.size() + (running_ ? 1 : 0);
  }

 private:
  void drain() {
    for (;;) {
      Instruction ins;
      {
        std::unique_lock lk(mutex_);
        ready_.wait(lk, [this] { return stop_ || !pending_.empty(); });
        if (pending_.empty()) return;
        ins = std::move(pending_.front());
        pending_.pop_front();
        running_ = true;
      }
      std::exception_ptr err;
      try {
        ins();
      } catch (...) {
        err = std::current_exception();
      }
      ins = nullptr;
      {
        std::lock_guard lk(mutex_);
        running_ = false;
        if (err && !failure_) failure_ = err;
      }
      idle_.notify_all();
    }
  }

  mutable std::mutex mutex_;
  std::condition_variable ready_;
  std::condition_variable idle_;
  std::deque<Instruction> pending_;
  bool running_ = false;
  bool stop_ = false;
  std::exception_ptr failure_;
  std::thread worker_;  // last: starts after the members above exist
};

}  // namespace matcha::backend

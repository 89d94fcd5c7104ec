#include "resim/threading.hpp"

#include <atomic>
#include <condition_variable>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace resim {

namespace {

int g_threads = 0;

// Lazily grown pool that persists for the process lifetime. One run at a
// time; every parked worker participates in each run. parallel_for must not
// be nested.
class Pool {
 public:
  static Pool& instance() {
    static Pool* pool = new Pool();  // leaked: workers may outlive statics
    return *pool;
  }

  void run(int n, const std::function<void(int)>& fn, int workers) {
    std::unique_lock lock(mutex_);
    while (int(threads_.size()) < workers - 1)
      threads_.emplace_back([this] { worker_loop(); });
    ready_cv_.wait(lock, [&] { return parked_ == int(threads_.size()); });

    fn_ = &fn;
    total_ = n;
    next_.store(0, std::memory_order_relaxed);
    pending_ = int(threads_.size());
    first_error_ = nullptr;
    ++generation_;
    cv_.notify_all();
    lock.unlock();

    work();

    lock.lock();
    done_cv_.wait(lock, [&] { return pending_ == 0; });
    fn_ = nullptr;
    if (first_error_) std::rethrow_exception(first_error_);
  }

 private:
  void worker_loop() {
    std::unique_lock lock(mutex_);
    ++parked_;
    ready_cv_.notify_all();
    uint64_t seen = generation_;
    for (;;) {
      cv_.wait(lock, [&] { return generation_ != seen; });
      seen = generation_;
      lock.unlock();
      work();
      lock.lock();
      if (--pending_ == 0) done_cv_.notify_all();
    }
  }

  void work() {
    const std::function<void(int)>* fn = fn_;
    if (!fn) return;
    for (;;) {
      int i = next_.fetch_add(1, std::memory_order_relaxed);
      if (i >= total_) break;
      try {
        (*fn)(i);
      } catch (...) {
        std::lock_guard lock(error_mutex_);
        if (!first_error_) first_error_ = std::current_exception();
      }
    }
  }

  std::mutex mutex_;
  std::mutex error_mutex_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  std::condition_variable ready_cv_;
  std::vector<std::thread> threads_;
  const std::function<void(int)>* fn_ = nullptr;
  std::atomic<int> next_{0};
  int total_ = 0;
  int pending_ = 0;
  int parked_ = 0;
  uint64_t generation_ = 0;
  std::exception_ptr first_error_;
};

}  // namespace

void set_num_threads(int n) { g_threads = n < 0 ? 0 : n; }

int num_threads() {
  if (g_threads > 0) return g_threads;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : int(hw);
}

void parallel_for(int n, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  int workers = num_threads();
  if (workers > n) workers = n;
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  Pool::instance().run(n, fn, workers);
}

}  // namespace resim

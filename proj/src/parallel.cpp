#include "cbctox/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>

namespace cbctox {

namespace {
// Nested parallel_for calls (e.g. a parallel study step invoking a parallel
// kernel) run inline on the calling thread.
thread_local bool tl_in_parallel = false;
}  // namespace

struct ThreadPool::Impl {
  std::mutex mu;
  std::condition_variable cv_work;
  std::condition_variable cv_done;
  std::vector<std::thread> workers;
  bool stopping = false;

  // current job
  const std::function<void(std::int64_t, std::int64_t)>* fn = nullptr;
  std::atomic<std::int64_t> cursor{0};
  std::int64_t end = 0;
  std::int64_t grain = 1;
  std::atomic<int> active{0};
  std::uint64_t job_id = 0;

  void worker_loop() {
    std::uint64_t seen = 0;
    for (;;) {
      {
        std::unique_lock<std::mutex> lk(mu);
        cv_work.wait(lk, [&] { return stopping || job_id != seen; });
        if (stopping) return;
        seen = job_id;
        active.fetch_add(1, std::memory_order_relaxed);
      }
      drain();
      {
        std::lock_guard<std::mutex> lk(mu);
        if (active.fetch_sub(1, std::memory_order_relaxed) == 1)
          cv_done.notify_all();
      }
    }
  }

  void drain() {
    tl_in_parallel = true;
    for (;;) {
      const std::int64_t b = cursor.fetch_add(grain, std::memory_order_relaxed);
      if (b >= end) break;
      const std::int64_t e = std::min(end, b + grain);
      (*fn)(b, e);
    }
    tl_in_parallel = false;
  }

  void stop_workers() {
    {
      std::lock_guard<std::mutex> lk(mu);
      stopping = true;
    }
    cv_work.notify_all();
    for (auto& t : workers) t.join();
    workers.clear();
    stopping = false;
  }
};

ThreadPool::ThreadPool() : impl_(new Impl) {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  set_threads(hw > 0 ? hw : 1);
}

ThreadPool::~ThreadPool() {
  impl_->stop_workers();
  delete impl_;
}

ThreadPool& ThreadPool::instance() {
  static ThreadPool pool;
  return pool;
}

void ThreadPool::set_threads(int n) {
  if (n < 1) n = 1;
  impl_->stop_workers();
  for (int i = 0; i < n - 1; ++i)
    impl_->workers.emplace_back([this] { impl_->worker_loop(); });
}

int ThreadPool::threads() const {
  return static_cast<int>(impl_->workers.size()) + 1;
}

void ThreadPool::run(std::int64_t begin, std::int64_t end, std::int64_t grain,
                     const std::function<void(std::int64_t, std::int64_t)>& fn) {
  if (begin >= end) return;
  if (grain < 1) grain = 1;
  if (tl_in_parallel || impl_->workers.empty() || end - begin <= grain) {
    std::int64_t b = begin;
    while (b < end) {
      const std::int64_t e = std::min(end, b + grain);
      fn(b, e);
      b = e;
    }
    return;
  }
  {
    std::lock_guard<std::mutex> lk(impl_->mu);
    impl_->fn = &fn;
    impl_->cursor.store(begin, std::memory_order_relaxed);
    impl_->end = end;
    impl_->grain = grain;
    ++impl_->job_id;
  }
  impl_->cv_work.notify_all();
  impl_->drain();  // caller participates
  std::unique_lock<std::mutex> lk(impl_->mu);
  impl_->cv_done.wait(lk, [&] {
    return impl_->active.load(std::memory_order_relaxed) == 0;
  });
  impl_->fn = nullptr;
}

}  // namespace cbctox

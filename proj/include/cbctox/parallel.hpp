#pragma once

// Shared worker pool. parallel_for writes to disjoint ranges only, and
// reductions go through chunked_sum with a fixed chunk grid, so numeric
// results do not depend on the thread count.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <vector>

namespace cbctox {

class ThreadPool {
 public:
  static ThreadPool& instance();

  void set_threads(int n);
  int threads() const;

  // fn(begin, end) over a partition of [begin, end); blocks until done.
  void run(std::int64_t begin, std::int64_t end, std::int64_t grain,
           const std::function<void(std::int64_t, std::int64_t)>& fn);

 private:
  ThreadPool();
  ~ThreadPool();
  struct Impl;
  Impl* impl_;
};

template <class F>
void parallel_for(std::int64_t begin, std::int64_t end, std::int64_t grain,
                  F&& fn) {
  ThreadPool::instance().run(begin, end, grain,
                             std::function<void(std::int64_t, std::int64_t)>(
                                 std::forward<F>(fn)));
}

// Deterministic parallel reduction: fixed 16k-element chunks evaluated in
// parallel, partials combined sequentially in chunk order.
inline constexpr std::int64_t kReduceChunk = 16384;

template <class T, class F>
T chunked_sum(std::int64_t n, F&& partial) {
  if (n <= 0) return T(0);
  const std::int64_t nchunks = (n + kReduceChunk - 1) / kReduceChunk;
  if (nchunks == 1) return partial(std::int64_t(0), n);
  std::vector<T> parts(static_cast<std::size_t>(nchunks));
  parallel_for(0, nchunks, 1, [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t c = b; c < e; ++c)
      parts[static_cast<std::size_t>(c)] =
          partial(c * kReduceChunk, std::min(n, (c + 1) * kReduceChunk));
  });
  T s = T(0);
  for (const T& p : parts) s = s + p;
  return s;
}

}  // namespace cbctox

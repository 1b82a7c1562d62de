#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace shiftfunc {

inline std::atomic<int>& detail_thread_count() {
  static std::atomic<int> n{0};  // 0 = pick hardware concurrency lazily
  return n;
}

inline void set_default_threads(int n) { detail_thread_count().store(n < 1 ? 1 : n); }

inline int default_threads() {
  int n = detail_thread_count().load();
  if (n < 1) {
    unsigned hw = std::thread::hardware_concurrency();
    n = hw == 0 ? 1 : static_cast<int>(std::min<unsigned>(hw, 16));
  }
  return n;
}

inline bool& detail_inside_parallel() {
  thread_local bool inside = false;
  return inside;
}

// Static-partition parallel loop. Results must be written by index into
// preallocated storage by the caller; reductions over that storage then run
// in index order, so the outcome is bitwise independent of the thread count.
// Nested calls run serially on the calling worker (the outer loop already
// owns the cores).
template <class Fn>
void parallel_for(std::int64_t n, Fn&& fn, int threads = 0) {
  if (threads <= 0) threads = default_threads();
  if (n <= 0) return;
  threads = static_cast<int>(std::min<std::int64_t>(threads, n));
  if (threads == 1 || detail_inside_parallel()) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::int64_t chunk = (n + threads - 1) / threads;
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads - 1));
  auto run = [&](std::int64_t lo, std::int64_t hi) {
    detail_inside_parallel() = true;
    try {
      for (std::int64_t i = lo; i < hi && !failed.load(std::memory_order_relaxed); ++i) fn(i);
    } catch (...) {
      if (!failed.exchange(true)) error = std::current_exception();
    }
    detail_inside_parallel() = false;
  };
  for (int t = 1; t < threads; ++t) {
    const std::int64_t lo = t * chunk;
    const std::int64_t hi = std::min<std::int64_t>(n, lo + chunk);
    if (lo < hi) pool.emplace_back(run, lo, hi);
  }
  run(0, std::min<std::int64_t>(n, chunk));
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace shiftfunc

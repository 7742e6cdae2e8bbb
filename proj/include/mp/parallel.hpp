#pragma once

#include <algorithm>
#include <cstdlib>
#include <cstddef>
#include <thread>
#include <vector>

namespace mp {

inline int default_thread_limit() {
  if (const char* env = std::getenv("MOTIONPRIOR_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

namespace detail {
inline int& thread_limit_storage() {
  static int limit = default_thread_limit();
  return limit;
}
}  // namespace detail

inline int thread_limit() { return detail::thread_limit_storage(); }
inline void set_thread_limit(int n) { detail::thread_limit_storage() = std::max(1, n); }

// Runs fn(i) for i in [0, n), split into contiguous chunks, one per worker.
// Each index is processed exactly once, so per-index writes are race-free and
// the result does not depend on the worker count. fn must not throw.
template <class F>
void parallel_for(std::size_t n, F&& fn) {
  std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(thread_limit()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    std::size_t lo = w * chunk;
    std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace mp

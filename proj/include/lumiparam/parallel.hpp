#ifndef LUMIPARAM_PARALLEL_HPP
#define LUMIPARAM_PARALLEL_HPP

// Row-parallel loops. Every index is processed by exactly one worker, so
// callers that reduce per-index partials in index order get bitwise identical
// results for any thread count.

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lumiparam {

/// Worker count: hardware concurrency, capped by LUMIPARAM_THREADS when set.
inline int thread_count() {
  static const int count = [] {
    int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char *env = std::getenv("LUMIPARAM_THREADS")) {
      const int cap = std::atoi(env);
      if (cap > 0) n = std::min(n, cap);
    }
    return n;
  }();
  return count;
}

/// Calls fn(i) for i in [begin, end), split into contiguous chunks.
template <typename Fn> void parallel_for(int begin, int end, Fn &&fn, int min_per_worker = 8) {
  const int n = end - begin;
  if (n <= 0) return;
  const int workers = std::min(thread_count(), std::max(1, n / std::max(1, min_per_worker)));
  if (workers <= 1) {
    for (int i = begin; i < end; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const int lo = begin + static_cast<int>(static_cast<long long>(n) * w / workers);
    const int hi = begin + static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
    pool.emplace_back([&, lo, hi] {
      try {
        for (int i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto &t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

} // namespace lumiparam

#endif // LUMIPARAM_PARALLEL_HPP

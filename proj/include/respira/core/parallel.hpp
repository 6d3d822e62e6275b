#pragma once
#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace respira {

// Global worker count. 1 = fully sequential. Parallel loops below partition
// work by index so results are identical for any worker count; the strict
// deterministic CLI mode still forces 1.
inline int& thread_count() {
  static int n = 1;
  return n;
}

inline void set_thread_count(int n) {
  thread_count() = std::max(1, n);
}

// Runs fn(i) for i in [0, n). Each index is processed exactly once by one
// worker; fn must not touch state shared across indices.
inline void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
  int workers = std::min<int64_t>(thread_count(), n);
  if (workers <= 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int64_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        int64_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace respira

#pragma once

#include <cstdlib>
#include <thread>
#include <vector>

namespace viewpcl::detail {

/// Worker count: VIEWPCL_WORKERS env var overrides hardware concurrency.
inline unsigned worker_count() {
  if (const char* env = std::getenv("VIEWPCL_WORKERS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Runs fn(i) for i in [0, n). Workers own disjoint index strides, so fn may
/// write to per-index slots without synchronization.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const unsigned workers = worker_count();
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([=, &fn] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace viewpcl::detail

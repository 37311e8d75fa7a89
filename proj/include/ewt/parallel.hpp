#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace ewt {

namespace detail {
inline std::atomic<int>& thread_setting() {
  static std::atomic<int> value{0};
  return value;
}

// Set on worker threads so nested loops run inline instead of spawning.
inline bool& inside_parallel_region() {
  thread_local bool flag = false;
  return flag;
}
}  // namespace detail

/// Caps the worker count used by parallel_for. Zero restores the default
/// (EWT_THREADS if set, otherwise hardware concurrency).
inline void set_thread_count(int n) { detail::thread_setting().store(std::max(0, n)); }

inline int thread_count() {
  const int configured = detail::thread_setting().load();
  if (configured > 0) return configured;
  if (const char* env = std::getenv("EWT_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Runs fn(i) for i in [0, n). Indices are split into contiguous chunks; each
/// index is processed exactly once, so results only depend on fn being free of
/// cross-index writes. The first exception thrown by any worker is rethrown.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
  if (n <= 0) return;
  const int workers = detail::inside_parallel_region() ? 1 : std::min(thread_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&](int begin, int end) {
    const bool was_inside = detail::inside_parallel_region();
    detail::inside_parallel_region() = true;
    try {
      for (int i = begin; i < end; ++i) fn(i);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
    detail::inside_parallel_region() = was_inside;
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers - 1));
  const int chunk = (n + workers - 1) / workers;
  for (int w = 1; w < workers; ++w) {
    const int begin = w * chunk;
    const int end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back(run, begin, end);
  }
  run(0, std::min(n, chunk));
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace ewt

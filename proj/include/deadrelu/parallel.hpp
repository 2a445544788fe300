#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace deadrelu {

/// Calls fn(i) for i in [0, n) on up to `threads` workers. Each index is
/// processed exactly once; callers write results into slot i so the
/// outcome does not depend on scheduling. The first exception thrown by
/// any worker is rethrown after all workers have joined.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// DEADRELU_THREADS if set and positive, else `fallback`.
inline std::size_t thread_count_from_env(std::size_t fallback = 1) {
  if (const char* s = std::getenv("DEADRELU_THREADS")) {
    try {
      const long v = std::stol(s);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return fallback;
}

}  // namespace deadrelu

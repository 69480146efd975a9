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

namespace pcbound {

namespace detail {

inline std::atomic<std::size_t>& thread_override() {
  static std::atomic<std::size_t> value{0};
  return value;
}

inline bool& inside_worker() {
  thread_local bool flag = false;
  return flag;
}

}  // namespace detail

// Caps worker parallelism for the whole process; 0 restores the default
// (PCBOUND_THREADS, else the hardware concurrency).
inline void set_worker_threads(std::size_t n) { detail::thread_override().store(n); }

inline std::size_t worker_threads() {
  if (std::size_t n = detail::thread_override().load(); n > 0) return n;
  if (const char* env = std::getenv("PCBOUND_THREADS")) {
    try {
      long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

// Runs fn(i) for i in [0, n). Work is distributed dynamically, so fn must only
// write to slot i of its output; callers reduce in index order afterwards.
// Nested calls from inside a worker run serially.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  std::size_t threads = std::min(worker_threads(), n);
  if (threads <= 1 || detail::inside_worker()) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::size_t error_index = n;
  std::mutex error_mutex;
  auto worker = [&] {
    detail::inside_worker() = true;
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        // Keep the lowest-index failure so the reported error is scheduling independent.
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
    detail::inside_worker() = false;
  };
  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace pcbound

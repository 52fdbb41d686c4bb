#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qnsmc {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Run fn(i) for i in [0, n) across `threads` workers in contiguous chunks.
// Work item i behaves identically no matter which worker runs it, so the
// thread count never changes results. The first exception wins and is
// rethrown after all workers join.
template <class Fn>
void parallel_for(Eigen::Index n, int threads, Fn&& fn) {
  threads = resolve_threads(threads);
  if (threads == 1 || n < 2) {
    for (Eigen::Index i = 0; i < n; ++i) fn(i);
    return;
  }
  const int workers = static_cast<int>(std::min<Eigen::Index>(threads, n));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const Eigen::Index chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const Eigen::Index begin = w * chunk;
    const Eigen::Index end = std::min(n, begin + chunk);
    pool.emplace_back([&, begin, end] {
      try {
        for (Eigen::Index i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace qnsmc

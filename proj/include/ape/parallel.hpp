#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace ape {

// Runs fn(0..n_items-1) on up to `workers` threads. Work units must write
// only to their own output slot; results are then identical to sequential
// execution regardless of scheduling.
inline void parallel_for(int n_items, int workers, const std::function<void(int)>& fn) {
  if (n_items <= 0) return;
  if (workers <= 1 || n_items == 1) {
    for (int i = 0; i < n_items; ++i) fn(i);
    return;
  }
  const int nthreads = std::min(workers, n_items);
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(nthreads));
  for (int t = 0; t < nthreads; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n_items) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace ape

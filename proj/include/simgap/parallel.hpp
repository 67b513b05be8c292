#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

namespace simgap {

/// Result of a parallel sweep. `first_failure` is the lowest index whose body
/// threw (or `count` when none did); every index below it completed.
struct SweepResult {
  std::size_t first_failure;
  std::exception_ptr error;
};

/// Runs body(worker, index) for index in [0, count) on `workers` threads.
/// Indices are handed out in increasing order; after the first failure no new
/// indices are started, so the completed set always contains the prefix
/// [0, first_failure).
template <typename Body>
SweepResult parallel_sweep(std::size_t count, std::size_t workers, Body&& body) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex mu;
  SweepResult result{count, nullptr};

  auto run = [&](std::size_t w) {
    while (!stop.load(std::memory_order_relaxed)) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) break;
      try {
        body(w, i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (i < result.first_failure) {
          result.first_failure = i;
          result.error = std::current_exception();
        }
        stop = true;
      }
    }
  };

  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  return result;
}

/// parallel_sweep that rethrows the lowest-index failure.
template <typename Body>
void parallel_for(std::size_t count, std::size_t workers, Body&& body) {
  auto r = parallel_sweep(count, workers, std::forward<Body>(body));
  if (r.error) std::rethrow_exception(r.error);
}

}  // namespace simgap

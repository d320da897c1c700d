#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace subdivnet {

/// Number of worker threads used by parallel_for. Honors SUBDIVNET_THREADS.
int worker_count();

/// Calls body(i) for i in [begin, end) on contiguous chunks across worker threads.
/// The first exception thrown by any chunk is rethrown after all workers join.
template <typename Body>
void parallel_for(int begin, int end, Body&& body, int min_chunk = 256) {
  const int n = end - begin;
  if (n <= 0) return;
  const int workers = std::min(worker_count(), std::max(1, n / std::max(1, min_chunk)));
  if (workers <= 1) {
    for (int i = begin; i < end; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const int lo = begin + static_cast<int>(static_cast<long long>(n) * w / workers);
    const int hi = begin + static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
    threads.emplace_back([&, lo, hi] {
      try {
        for (int i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace subdivnet

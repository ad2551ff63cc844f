#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tti {

/// Calls fn(i) for every i in [0, n) on up to `width` threads. Indices are
/// claimed in increasing order; the first exception thrown stops further
/// claims and is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t n, unsigned width, Fn&& fn) {
  width = std::max(1u, std::min<unsigned>(width, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (width == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (!stop.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        stop = true;
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(width);
  for (unsigned t = 0; t < width; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace tti

// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace componerf {

inline int default_thread_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : int(hw);
}

/// Runs fn(task, worker) for task in [0, n_tasks). Tasks are claimed
/// dynamically; the first exception is rethrown after all workers join.
template <typename Fn>
void parallel_tasks(std::size_t n_tasks, int threads, Fn&& fn) {
  const int workers = std::max(1, std::min<int>(threads, int(n_tasks)));
  if (workers <= 1) {
    for (std::size_t t = 0; t < n_tasks; ++t) fn(t, 0);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(std::size_t(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t t; (t = next.fetch_add(1)) < n_tasks;) {
        try {
          fn(t, w);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// Contiguous [begin, end) of chunk `c` when splitting n items into `chunks`.
inline std::pair<std::size_t, std::size_t> chunk_range(std::size_t n, std::size_t chunks, std::size_t c) {
  return {n * c / chunks, n * (c + 1) / chunks};
}

}  // namespace componerf

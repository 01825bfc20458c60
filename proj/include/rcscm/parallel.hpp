#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include <Eigen/Core>

namespace rcscm {

// Static chunked parallel-for over [begin, end). Each index is processed by
// exactly one thread with fixed per-index work, so results do not depend on
// the thread count as long as indices are independent.
inline void parallel_for(Eigen::Index begin, Eigen::Index end, int threads,
                         const std::function<void(Eigen::Index)>& body) {
  const Eigen::Index n = end - begin;
  if (n <= 0) return;
  if (threads <= 1 || n == 1) {
    for (Eigen::Index i = begin; i < end; ++i) body(i);
    return;
  }
  const int workers = static_cast<int>(std::min<Eigen::Index>(threads, n));
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const Eigen::Index chunk = (n + workers - 1) / workers;
  for (int t = 0; t < workers; ++t) {
    const Eigen::Index lo = begin + t * chunk;
    const Eigen::Index hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body, &first_error, &error_mutex] {
      try {
        for (Eigen::Index i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Variant handing each worker its contiguous [lo, hi) range, so per-thread
// scratch can be allocated once per chunk instead of once per index.
inline void parallel_for_chunks(
    Eigen::Index begin, Eigen::Index end, int threads,
    const std::function<void(Eigen::Index, Eigen::Index)>& body) {
  const Eigen::Index n = end - begin;
  if (n <= 0) return;
  if (threads <= 1 || n == 1) {
    body(begin, end);
    return;
  }
  const int workers = static_cast<int>(std::min<Eigen::Index>(threads, n));
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const Eigen::Index chunk = (n + workers - 1) / workers;
  for (int t = 0; t < workers; ++t) {
    const Eigen::Index lo = begin + t * chunk;
    const Eigen::Index hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body, &first_error, &error_mutex] {
      try {
        body(lo, hi);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace rcscm

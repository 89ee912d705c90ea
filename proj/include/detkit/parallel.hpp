#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace detkit {

/// Thread cap from DETSEED_THREADS; defaults to 1. The cap changes only
/// scheduling, never results: work items must be independent and write
/// to disjoint slots.
inline unsigned detseed_threads() {
  const char* env = std::getenv("DETSEED_THREADS");
  if (!env) return 1;
  const long v = std::strtol(env, nullptr, 10);
  if (v < 1) return 1;
  return static_cast<unsigned>(v);
}

/// Runs fn(i) for i in [0, n) on up to detseed_threads() threads with a
/// fixed block partition. Output determinism is the caller's contract:
/// each i writes only to its own slot.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const unsigned threads = detseed_threads();
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const unsigned used = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  std::vector<std::thread> pool;
  pool.reserve(used);
  for (unsigned t = 0; t < used; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += used) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detkit

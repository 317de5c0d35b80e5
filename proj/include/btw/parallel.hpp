#pragma once

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace btw::par {

inline unsigned worker_count() {
  if (const char* env = std::getenv("BTW_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc ? hc : 1;
}

// Runs fn(replica_index) -> T for every replica and returns the results in
// replica order. Each replica derives its randomness from its index, so the
// output is independent of scheduling.
template <typename T, typename Fn>
std::vector<T> run_replicas(std::size_t n, Fn&& fn, unsigned workers = 0) {
  if (workers == 0) workers = worker_count();
  std::vector<T> results(n);
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) results[i] = fn(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  auto body = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      results[i] = fn(i);
    }
  };
  std::vector<std::thread> pool;
  unsigned spawn = std::min<std::size_t>(workers, n);
  pool.reserve(spawn);
  for (unsigned w = 0; w < spawn; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  return results;
}

}  // namespace btw::par

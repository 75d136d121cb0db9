#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace riesz {

// Worker count from RIESZ_THREADS, else hardware concurrency.
inline unsigned worker_count() {
  if (const char* env = std::getenv("RIESZ_THREADS")) {
    try {
      int n = std::stoi(env);
      if (n > 0) return static_cast<unsigned>(n);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Calls fn(begin, end) on contiguous chunks of [0, n). Chunks are
// interleaved so triangular workloads stay balanced.
template <class Index, class Fn>
void parallel_for(Index n, Fn&& fn) {
  const unsigned workers = std::min<unsigned>(worker_count(), static_cast<unsigned>(std::max<Index>(n, 1)));
  if (workers <= 1 || n < 64) {
    fn(Index{0}, n);
    return;
  }
  const Index chunk = std::max<Index>(16, n / (8 * static_cast<Index>(workers)));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (Index b = static_cast<Index>(w) * chunk; b < n; b += static_cast<Index>(workers) * chunk)
        fn(b, std::min(n, b + chunk));
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace riesz

#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace stoplab {

/// Runs fn(begin, end) over fixed-size chunks of [0, n). Chunk boundaries
/// depend only on `chunk`, never on the thread count, so any output written
/// into caller-owned per-index slots is identical whatever `threads` is.
inline void parallel_chunks(long n, long chunk, int threads,
                            const std::function<void(long, long)>& fn) {
  if (n <= 0) return;
  if (chunk <= 0) chunk = 1;
  const long nchunks = (n + chunk - 1) / chunk;
  int nthreads = threads > 0 ? threads
                             : static_cast<int>(std::thread::hardware_concurrency());
  if (nthreads < 1) nthreads = 1;
  if (nthreads == 1 || nchunks == 1) {
    for (long c = 0; c < nchunks; ++c)
      fn(c * chunk, std::min(n, (c + 1) * chunk));
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (int t = 0; t < nthreads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const long c = next.fetch_add(1);
        if (c >= nchunks) return;
        fn(c * chunk, std::min(n, (c + 1) * chunk));
      }
    });
  }
  for (auto& th : pool) th.join();
}

} // namespace stoplab

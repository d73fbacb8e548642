#pragma once

// Deterministic work sharing: work is cut into fixed-size chunks by index,
// threads grab chunks in any order, and callers reduce per-chunk results in
// index order.  Output is then independent of the thread count.

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace opcal {

inline int& worker_threads() {
  static int n = 1;
  return n;
}

// fn(chunk_index, begin, end) must write only to chunk-owned slots.
template <class F>
void parallel_chunks(int total, int chunk, F&& fn) {
  if (total <= 0) return;
  int nchunks = (total + chunk - 1) / chunk;
  int nthreads = worker_threads();
  if (nthreads <= 1 || nchunks == 1) {
    for (int c = 0; c < nchunks; ++c) fn(c, c * chunk, std::min(total, (c + 1) * chunk));
    return;
  }
  std::atomic<int> next{0};
  auto work = [&] {
    for (;;) {
      int c = next.fetch_add(1);
      if (c >= nchunks) return;
      fn(c, c * chunk, std::min(total, (c + 1) * chunk));
    }
  };
  std::vector<std::thread> pool;
  int spawn = std::min(nthreads, nchunks);
  pool.reserve(static_cast<size_t>(spawn));
  for (int t = 0; t < spawn; ++t) pool.emplace_back(work);
  for (auto& th : pool) th.join();
}

}  // namespace opcal

#pragma once

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace onalloc {

/// Worker cap: ALLOC_WORKERS env var if set (>=1), else hardware concurrency.
inline int max_workers() {
  if (const char* env = std::getenv("ALLOC_WORKERS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(trial, partial) for trial = 0..trials-1 across a worker pool.
/// Trials are grouped into fixed blocks; each block accumulates into its own
/// Partial sequentially and blocks are merged in index order, so the result
/// is bit-identical regardless of worker count or scheduling.
///
/// Partial: default-constructible with merge(const Partial&).
template <class Partial, class PerTrial>
Partial run_trials(int trials, PerTrial fn, int block_size = 256) {
  Partial total;
  if (trials <= 0) return total;
  const int nblocks = (trials + block_size - 1) / block_size;
  const int workers = std::min(max_workers(), nblocks);

  std::vector<Partial> partials(nblocks);
  auto run_block = [&](int b) {
    const int begin = b * block_size;
    const int end = std::min(trials, begin + block_size);
    for (int t = begin; t < end; ++t) fn(t, partials[b]);
  };

  if (workers <= 1) {
    for (int b = 0; b < nblocks; ++b) run_block(b);
  } else {
    std::atomic<int> next{0};
    auto work = [&] {
      for (;;) {
        const int b = next.fetch_add(1);
        if (b >= nblocks) return;
        run_block(b);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (auto& p : partials) total.merge(p);
  return total;
}

}  // namespace onalloc

#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace tfw {

// Worker count from TFWLAB_WORKERS; defaults to 1. All parallel loops write
// results keyed by index, so the outcome is independent of the pool size.
inline int worker_count() {
  if (const char* env = std::getenv("TFWLAB_WORKERS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return 1;
}

template <typename Fn>
void parallel_for_index(long count, int workers, Fn&& fn) {
  if (count <= 0) return;
  if (workers <= 1 || count == 1) {
    for (long i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  auto drain = [&] {
    for (;;) {
      const long i = next.fetch_add(1);
      if (i >= count) return;
      fn(i);
    }
  };
  std::vector<std::thread> threads;
  const int spawn = static_cast<int>(std::min<long>(workers, count));
  threads.reserve(spawn);
  for (int t = 0; t < spawn; ++t) threads.emplace_back(drain);
  for (auto& t : threads) t.join();
}

}  // namespace tfw

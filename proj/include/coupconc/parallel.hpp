#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace coupconc {

// Runs body(begin, end) over contiguous chunks of [0, count). Chunks write
// disjoint outputs, so results never depend on the thread count.
// `grain` is the smallest chunk worth a thread.
template <typename Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body,
                  std::size_t grain = 1024) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers =
      std::min<std::size_t>(threads, std::max<std::size_t>(count / std::max<std::size_t>(grain, 1), 1));
  if (workers <= 1) {
    body(std::size_t{0}, count);
    return;
  }
  const std::size_t chunk = (count + workers - 1) / workers;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
}

}  // namespace coupconc

#pragma once

#include <algorithm>
#include <thread>
#include <vector>

#include "hedonic/types.hpp"

namespace hedonic {

/// Runs body(k) for k in [0, count) over `threads` workers in contiguous
/// blocks. Each index is visited exactly once, so writes indexed by k are
/// deterministic regardless of the thread count.
template <typename Body>
void parallel_for(Index count, int threads, Body&& body) {
  const Index workers = std::clamp<Index>(threads, 1, std::max<Index>(count, 1));
  if (workers == 1) {
    for (Index k = 0; k < count; ++k) body(k);
    return;
  }
  std::vector<std::jthread> pool;
  const Index block = (count + workers - 1) / workers;
  for (Index w = 0; w < workers; ++w) {
    const Index begin = w * block;
    const Index end = std::min(count, begin + block);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] {
      for (Index k = begin; k < end; ++k) body(k);
    });
  }
}

}  // namespace hedonic

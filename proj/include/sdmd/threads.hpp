#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sdmd/errors.hpp"

namespace sdmd {

// Worker count for data-parallel loops. Defaults to the SDMD_LAB_THREADS
// environment variable, falling back to 1.
int thread_count();
void set_thread_count(int n);

// Runs fn(begin, end, block_index) over consecutive fixed-size blocks of
// [0, n). Block boundaries depend only on block_size, never on the worker
// count, so per-block outputs combined in block order are bitwise identical
// for any number of threads.
void parallel_blocks(std::int64_t n, std::int64_t block_size,
                     const std::function<void(std::int64_t, std::int64_t, int)>& fn);

inline int block_count(std::int64_t n, std::int64_t block_size) {
  return static_cast<int>((n + block_size - 1) / block_size);
}

// Pairwise tree reduction over per-block partial sums, in fixed block order.
template <class M>
M tree_reduce(std::vector<M> parts) {
  if (parts.empty()) throw InvalidArgument("tree_reduce: no partial results");
  while (parts.size() > 1) {
    std::vector<M> next;
    next.reserve((parts.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < parts.size(); i += 2)
      next.push_back(parts[i] + parts[i + 1]);
    if (parts.size() % 2) next.push_back(parts.back());
    parts = std::move(next);
  }
  return parts[0];
}

}  // namespace sdmd

#pragma once

#include <cstddef>
#include <functional>

namespace pclnet {

/// Worker cap for data-parallel loops; 1 runs everything on the caller.
void set_thread_count(int threads);
int thread_count();

/// Runs body(begin, end) over [0, n) split into contiguous chunks of at most
/// `grain` items. Chunk boundaries depend only on n and grain, never on the
/// worker count, so callers that reduce per chunk in chunk order stay
/// bit-stable for any thread count.
void parallel_chunks(std::size_t n, std::size_t grain,
                     const std::function<void(std::size_t chunk,
                                              std::size_t begin,
                                              std::size_t end)>& body);

inline std::size_t chunk_count(std::size_t n, std::size_t grain) {
  return grain == 0 ? 0 : (n + grain - 1) / grain;
}

}  // namespace pclnet

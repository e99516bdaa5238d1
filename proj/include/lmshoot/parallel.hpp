#pragma once

#include <cstddef>
#include <functional>

namespace lmshoot {

// Number of hardware threads (at least 1).
unsigned hardware_threads();

// Runs body(begin, end) over [0, n) split into contiguous chunks, at most
// `threads` of them (0 = hardware concurrency). Chunk boundaries depend only
// on (n, threads), never on scheduling, and every index is processed by
// exactly one chunk, so callers that keep each index's work self-contained
// get bitwise-reproducible results for any worker count.
//
// Blocks until all chunks complete; rethrows the first exception raised in a
// chunk. Not reentrant from inside a chunk body.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace lmshoot

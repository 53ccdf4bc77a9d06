#pragma once

#include <cstddef>
#include <functional>

namespace narrownet {

// Worker count: `requested` if > 0, else $NARROWNET_THREADS if set and > 0,
// else hardware concurrency (at least 1).
std::size_t resolve_threads(std::size_t requested = 0);

// Calls body(begin, end) on disjoint chunks covering [0, n). Chunk
// boundaries depend only on n and `threads`; callers must make results
// independent of them anyway.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace narrownet

#pragma once

#include <cstddef>
#include <functional>

namespace phasegen {

// Worker cap: min(PHASEGEN_THREADS, hardware concurrency), at least 1.
// PHASEGEN_THREADS unset or invalid falls back to hardware concurrency.
int max_threads();

// Runs fn(i) for i in [0, count), split contiguously over at most
// max_threads() workers (or `threads` if positive).  Each index is visited
// exactly once; callers keep determinism by writing only to per-index slots.
void parallel_for(size_t count, const std::function<void(size_t)>& fn, int threads = 0);

}  // namespace phasegen

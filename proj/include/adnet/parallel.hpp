#pragma once

#include <cstdint>
#include <functional>

namespace adnet {

// Data parallelism over disjoint output slices.  Slice scheduling is
// arbitrary but every slice is computed whole by one thread, so results are
// bit-identical for any thread count.

int num_threads();
void set_num_threads(int n); // n < 1 resets to the default

void parallel_for(int64_t count, const std::function<void(int64_t)>& fn);

/// Splits [0, count) into fixed-size blocks and runs fn(lo, hi) per block.
void parallel_for_blocked(int64_t count, const std::function<void(int64_t, int64_t)>& fn);

} // namespace adnet

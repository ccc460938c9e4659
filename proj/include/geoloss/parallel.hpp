#pragma once

#include <cstddef>
#include <functional>

namespace geoloss {

// Worker count: GEOLOSS_THREADS if set to a positive integer, otherwise the
// hardware concurrency (at least 1).
int ThreadCount();

// Calls fn(i) for i in [0, n) on up to ThreadCount() threads, in contiguous
// blocks. fn must only write to per-index state; callers reduce afterwards
// in index order so results do not depend on the thread count. The first
// exception thrown by any fn is rethrown here.
void ParallelFor(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace geoloss

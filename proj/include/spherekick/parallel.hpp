#pragma once

#include <cstddef>
#include <functional>

namespace spherekick {

/// Worker count from SPHEREKICK_THREADS if set and positive, else `fallback`.
int resolve_worker_count(int fallback = 1);

/// Calls fn(i) for i in [0, n) on up to `workers` threads. Results must be
/// written to per-index slots; reduction is the caller's job. If any call
/// throws, the exception from the lowest index is rethrown after all workers
/// stop.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace spherekick

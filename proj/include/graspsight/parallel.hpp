#pragma once

#include <cstdint>
#include <functional>

namespace gs {

// Worker count: min(hardware_concurrency, GRASPSIGHT_THREADS). Never 0.
int worker_count();

// Runs fn(begin, end) over a disjoint partition of [0, n). Each index is
// processed by exactly one worker and every per-element computation is
// internally sequential, so results do not depend on the worker count.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace gs

#pragma once

#include <cstddef>
#include <functional>

namespace eam {

// Worker count from EAM_THREADS, else hardware concurrency (at least 1).
int thread_count();

// Runs body(i) for i in [0, n). Work is split into contiguous chunks; the first exception
// thrown by any worker is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  int threads = 0);

}  // namespace eam

#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace eqr::par {

/// Resolved worker count: explicit request, else EQRESTORE_WORKERS, else
/// hardware concurrency. Always >= 1.
int default_workers();
int resolve_workers(int requested);

/// Runs fn(i) for i in [0, n). workers <= 1 runs the plain serial loop;
/// otherwise iterations are distributed over an OpenMP static schedule.
/// Contract: fn must write disjoint state per index and perform no
/// cross-iteration reductions, so results are bitwise identical for every
/// worker count. Exceptions are captured and rethrown after the region.
void parallel_for(int workers, std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace eqr::par

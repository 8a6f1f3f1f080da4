#pragma once

#include <cstddef>
#include <functional>

namespace ofspc {

/// Worker count: hardware concurrency, capped by the OFSPC_THREADS
/// environment variable when it is set to a positive integer.
int worker_count();

/// Runs task(i) for i in [0, count) on up to worker_count() threads. Tasks
/// must write only to their own slot; callers reduce results in index order,
/// so outcomes never depend on the worker count. The first exception thrown
/// by any task is rethrown after all workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& task);

}  // namespace ofspc

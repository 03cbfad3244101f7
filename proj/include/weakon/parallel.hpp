#pragma once

#include <cstddef>
#include <functional>

namespace weakon {

// Worker count: WEAKON_THREADS when set (>= 1), else hardware concurrency.
std::size_t thread_count();

// Runs body(i) for i in [0, count) over contiguous chunks, one per worker.
// The first exception thrown by any worker is rethrown after all join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace weakon

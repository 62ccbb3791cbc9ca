#pragma once

#include <cstddef>
#include <functional>

namespace flowcast {

/// Worker cap: FLOWCAST_THREADS when set to a positive integer, else hardware concurrency.
std::size_t worker_count();

/// Runs body(begin, end) over contiguous chunks of [0, n) on up to worker_count() threads.
/// Chunk boundaries depend only on n and the worker count. The first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace flowcast

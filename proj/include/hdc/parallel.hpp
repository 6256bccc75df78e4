#pragma once

#include <cstddef>
#include <functional>

namespace hdc {

// HDC_THREADS if set to a positive integer, otherwise std::thread::hardware_concurrency().
std::size_t worker_threads();

// Runs body(i) for i in [0, n) on up to worker_threads() threads. Each index runs exactly once;
// the first exception thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace hdc

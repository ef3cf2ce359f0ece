#pragma once

#include <cstddef>
#include <functional>

namespace lgfed {

// Runs body(i) for i in [0, n) on up to `threads` workers. Each index runs exactly once;
// callers write results into per-index slots so the outcome is independent of scheduling.
// The first exception thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body);

}  // namespace lgfed

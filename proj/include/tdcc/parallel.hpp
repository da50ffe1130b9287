#pragma once

#include <cstddef>
#include <functional>

namespace tdcc {

/// Number of worker threads used by default (hardware concurrency, at least 1).
std::size_t default_threads();

/// Runs body(i) for i in [0, n) on up to `threads` workers. Each index is
/// processed exactly once; callers write results into per-index slots so the
/// outcome does not depend on scheduling. The first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  std::size_t threads = default_threads());

}  // namespace tdcc

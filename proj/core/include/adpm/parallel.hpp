#pragma once

#include <cstddef>
#include <functional>

namespace adpm {

/// Worker count from the ADPM_THREADS environment variable, else the
/// hardware concurrency (at least 1).
std::size_t thread_count();

/// Runs fn(i) for i in [0, n). Calls made from inside another parallel_for
/// run serially. If any call throws, the exception from the lowest index is
/// rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t threads = thread_count());

}  // namespace adpm

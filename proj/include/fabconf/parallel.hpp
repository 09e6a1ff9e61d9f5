#pragma once

#include <cstddef>
#include <functional>

namespace fabconf {

/// Worker count: FABCONF_THREADS if set to a positive integer, otherwise
/// std::thread::hardware_concurrency() (at least 1).
unsigned default_thread_count();

/// Calls body(i) for i in [0, count) on up to `threads` workers. Indices are
/// handed out in contiguous blocks; body must only write to per-index state.
/// The first exception thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                  unsigned threads = 0);

}  // namespace fabconf

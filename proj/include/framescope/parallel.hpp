#pragma once

#include <cstddef>
#include <functional>

namespace framescope {

// Runs fn(0) .. fn(n-1) on up to `threads` worker threads. Tasks must write
// only to their own output slots; assembly order is the caller's business.
// The first exception (lowest task index) is rethrown after all workers join.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace framescope

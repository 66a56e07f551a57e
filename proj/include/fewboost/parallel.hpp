#pragma once

#include <cstddef>
#include <functional>

namespace fewboost {

// Worker count from FEWBOOST_THREADS; unset or 0 means hardware concurrency.
std::size_t thread_count();

// Calls fn(i) for i in [0, n) on up to `threads` workers. The first
// exception thrown by any call is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t threads = thread_count());

}  // namespace fewboost

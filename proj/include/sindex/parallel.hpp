#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace sindex {

/// Worker count: SINDEX_THREADS if set and positive, otherwise hardware concurrency.
unsigned thread_count();

/// Runs fn(i) for i in [0, n) across up to `threads` workers. The first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, unsigned threads = thread_count());

} // namespace sindex

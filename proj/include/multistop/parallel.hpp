#ifndef MULTISTOP_PARALLEL_HPP
#define MULTISTOP_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace multistop {

/// Number of worker threads to use when the caller passes 0.
inline unsigned default_thread_count() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

/**
 * Split [0, count) into contiguous chunks and run body(begin, end) on each.
 *
 * Chunk boundaries depend only on count and threads, and every index is
 * handled by exactly one call, so bodies that write to disjoint slots give
 * schedule-independent results. The first exception thrown by any chunk is
 * rethrown on the calling thread.
 */
template <typename Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
    if (count == 0) return;
    if (threads == 0) threads = default_thread_count();
    const std::size_t workers = std::min<std::size_t>(threads, count);
    if (workers <= 1) {
        body(std::size_t{0}, count);
        return;
    }

    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(count, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] {
            try {
                body(begin, end);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace multistop

#endif  // MULTISTOP_PARALLEL_HPP

/// @file parallel.hpp
/// @brief Minimal path-parallel loop. Work items are independent; callers reduce
/// results afterwards in index order so outputs do not depend on the worker count.
#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace kiw {

inline int resolve_workers(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Run fn(i) for i in [0, count) on up to `workers` threads (0 = hardware concurrency).
/// The first exception thrown by any item is rethrown on the calling thread.
template <class Fn>
void parallel_for(int count, int workers, Fn&& fn) {
    const int w = std::min(resolve_workers(workers), std::max(count, 1));
    if (w <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(w));
    for (int t = 0; t < w; ++t)
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace kiw

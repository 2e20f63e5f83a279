#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace lcrowd {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Items are claimed in
/// index order; the first exception thrown by any item is rethrown after all
/// workers finish.
template <typename F>
void parallel_for(std::size_t n, int workers, F&& fn) {
    const std::size_t threads = std::min<std::size_t>(std::max(workers, 1), n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::atomic_flag error_set = ATOMIC_FLAG_INIT;
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                if (!error_set.test_and_set()) first_error = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace lcrowd

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace popfrac {

/// Runs body(i) for every i in [0, n) on up to `workers` threads. Work items
/// are claimed dynamically, so body must only write to per-index state. The
/// first exception thrown (lowest index among those observed) is rethrown
/// after all threads have joined.
inline void parallel_for(std::size_t n, std::size_t workers,
                         const std::function<void(std::size_t)>& body) {
    if (n == 0) return;
    workers = std::clamp<std::size_t>(workers, 1, n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::mutex error_mutex;
    std::exception_ptr error;
    std::size_t error_index = n;

    auto run = [&] {
        for (;;) {
            if (stop.load()) return;
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (i < error_index) {
                    error_index = i;
                    error = std::current_exception();
                }
                stop.store(true);
            }
        }
    };

    {
        std::vector<std::jthread> threads;
        threads.reserve(workers);
        for (std::size_t t = 0; t < workers; ++t) threads.emplace_back(run);
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace popfrac

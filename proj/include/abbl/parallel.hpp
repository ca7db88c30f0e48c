#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace abbl {

// Requested worker count; 0 means hardware concurrency.
inline unsigned resolve_threads(unsigned requested) noexcept
{
    if (requested != 0)
        return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

/*!
 * Run fn(i) for i in [0, n) on up to `threads` workers.
 *
 * Callers must write results into per-index slots; any reduction happens
 * afterwards in index order so results do not depend on the thread count.
 * The first exception thrown by any task is rethrown on the caller.
 */
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn)
{
    const unsigned workers =
        static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(n, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n || failed.load(std::memory_order_relaxed))
                return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
            }
        }
    };

    {
        std::vector<std::jthread> pool;
        pool.reserve(workers - 1);
        for (unsigned w = 1; w < workers; ++w)
            pool.emplace_back(work);
        work();
    }
    if (error)
        std::rethrow_exception(error);
}

} // namespace abbl

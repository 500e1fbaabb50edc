#pragma once

// Replicate-level parallelism. Results are written to slot r for replicate
// r, so the merged output does not depend on the number of workers.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace pdmp {

/// Worker count: hardware concurrency, capped by the PDMP_THREADS
/// environment variable when it is set to a positive integer.
inline unsigned thread_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("PDMP_THREADS")) {
        try {
            const long cap = std::stol(env);
            if (cap > 0) n = std::min(n, static_cast<unsigned>(cap));
        } catch (const std::exception&) {
            // Ignore malformed values.
        }
    }
    return n;
}

/// Evaluates fn(r) for r in [0, count) and returns the results in order.
/// The first exception thrown by any replicate is rethrown.
template <class Fn>
auto parallel_map(std::size_t count, Fn&& fn) -> std::vector<decltype(fn(std::size_t{}))> {
    using Result = decltype(fn(std::size_t{}));
    std::vector<Result> out(count);
    const unsigned workers = static_cast<unsigned>(
        std::min<std::size_t>(thread_count(), std::max<std::size_t>(count, 1)));
    if (workers <= 1) {
        for (std::size_t r = 0; r < count; ++r) out[r] = fn(r);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t r = next++; r < count; r = next++) {
            try {
                out[r] = fn(r);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = count;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

}  // namespace pdmp

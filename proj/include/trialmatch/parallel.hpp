#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace trialmatch {

/// out[i] = fn(i) for i in [0, n) on at most `parallelism` threads. Results
/// land by index, so the output never depends on scheduling. The first
/// exception (lowest index) is rethrown after all workers stop.
template <typename R, typename Fn>
std::vector<R> parallel_map(std::size_t n, std::size_t parallelism, Fn&& fn) {
    std::vector<R> out(n);
    const std::size_t workers = std::min<std::size_t>(std::max<std::size_t>(parallelism, 1), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex mu;
    std::size_t error_index = n;
    std::exception_ptr error;
    auto work = [&] {
        for (std::size_t i = next++; i < n && !failed; i = next++) {
            try {
                out[i] = fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (i < error_index) {
                    error_index = i;
                    error = std::current_exception();
                }
                failed = true;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    return out;
}

}  // namespace trialmatch

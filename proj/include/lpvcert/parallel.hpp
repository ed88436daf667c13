#pragma once

#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lpvcert {

inline unsigned effective_jobs(unsigned jobs) {
    if (jobs != 0)
        return jobs;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

/// Runs fn(i) for i in [0, n). Work is striped across threads and results
/// must be written into caller-owned per-index slots, so the reduction the
/// caller performs afterwards is order-independent by construction.
template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
    const unsigned workers = std::min<std::size_t>(effective_jobs(jobs), n == 0 ? 1 : n);
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers);
    std::exception_ptr first_error;
    std::mutex mtx;
    for (unsigned w = 0; w < workers; ++w) {
        threads.emplace_back([&, w]() {
            try {
                for (std::size_t i = w; i < n; i += workers) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mtx);
                if (!first_error)
                    first_error = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    if (first_error)
        std::rethrow_exception(first_error);
}

}  // namespace lpvcert

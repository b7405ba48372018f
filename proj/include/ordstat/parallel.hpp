#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace ordstat {

namespace detail {
inline std::atomic<unsigned>& thread_cap() {
    static std::atomic<unsigned> cap = [] {
        if (const char* env = std::getenv("ORDSTAT_THREADS")) {
            try {
                const int v = std::stoi(env);
                if (v > 0) return static_cast<unsigned>(v);
            } catch (...) {
            }
        }
        return std::max(1u, std::thread::hardware_concurrency());
    }();
    return cap;
}
}  // namespace detail

inline unsigned max_threads() { return detail::thread_cap().load(); }
inline void set_max_threads(unsigned n) { detail::thread_cap().store(std::max(1u, n)); }

/// Runs fn(i) for i in [0, n) on up to max_threads() workers. Tasks must be
/// independent; results are only as deterministic as the task bodies.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(max_threads(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mu);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    pool.clear();
    if (error) std::rethrow_exception(error);
}

}  // namespace ordstat

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace kcsp {

/// Process-wide cap on worker threads (set from --threads). 0 means hardware concurrency.
inline std::atomic<unsigned> thread_cap{0};

inline unsigned worker_count() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    unsigned cap = thread_cap.load();
    return cap == 0 ? hw : cap;
}

/// Run body(i) for i in [0, n). Indices are handed out dynamically, so results must be
/// written to slot i by the caller for the merge to stay deterministic.
template <class F>
void parallel_for(std::size_t n, F&& body) {
    const unsigned t = std::min<std::size_t>(worker_count(), n);
    if (t <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!err) err = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w + 1 < t; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace kcsp

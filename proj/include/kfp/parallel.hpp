#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace kfp {

// Static contiguous partition of [0, n) over `threads` workers. Each index is
// visited by exactly one worker, so callers that write into per-index slots
// get results independent of the thread count.
template <class F>
void parallel_for(int n, int threads, F&& fn) {
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int w = 0; w < threads; ++w) {
        const int lo = static_cast<int>(static_cast<long>(n) * w / threads);
        const int hi = static_cast<int>(static_cast<long>(n) * (w + 1) / threads);
        pool.emplace_back([&, lo, hi, w] {
            try {
                for (int i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace kfp

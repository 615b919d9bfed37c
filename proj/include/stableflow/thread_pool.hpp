#pragma once

#include <exception>
#include <functional>
#include <thread>
#include <vector>

#include "common.hpp"

namespace stableflow {

// Static contiguous partition of [0, n) over `workers` threads. Each slice is
// handed to `body(begin, end)`; callers write only to disjoint per-index slots,
// so results do not depend on the worker count.
inline void parallel_for(std::size_t n, int workers,
                         const std::function<void(std::size_t, std::size_t)>& body) {
    require(workers >= 1, "parallel_for: workers must be >= 1");
    if (n == 0) return;
    const auto w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    if (w == 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(w);
    pool.reserve(w);
    const std::size_t chunk = n / w;
    const std::size_t rem = n % w;
    std::size_t begin = 0;
    for (std::size_t t = 0; t < w; ++t) {
        const std::size_t end = begin + chunk + (t < rem ? 1 : 0);
        pool.emplace_back([&, t, begin, end] {
            try {
                body(begin, end);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
        begin = end;
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace stableflow

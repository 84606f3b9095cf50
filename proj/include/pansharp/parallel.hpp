#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace pansharp {

// Process-wide worker count for the conv kernels. Outputs are gather-only, so
// results are bitwise identical for any thread count; 1 disables spawning.
inline int& thread_count() {
    static int n = 1;
    return n;
}

inline void set_thread_count(int n) {
    thread_count() = std::max(1, n);
}

template <class Fn>
void parallel_for_rows(int rows, Fn&& fn) {
    int workers = std::min(thread_count(), rows);
    if (workers <= 1) {
        fn(0, rows);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    int chunk = (rows + workers - 1) / workers;
    for (int t = 0; t < workers; ++t) {
        int lo = t * chunk;
        int hi = std::min(rows, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& th : pool) th.join();
}

} // namespace pansharp

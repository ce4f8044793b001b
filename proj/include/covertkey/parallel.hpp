#pragma once

#include <cstdint>
#include <future>
#include <thread>
#include <vector>

namespace covertkey {

// Run fn(i) for i in [0, count) across worker threads. Each index must write
// only to its own preallocated slot(s); results are then reduced by the caller
// in index order, so the outcome is independent of the thread count.
template <typename Fn>
void parallel_for(std::int64_t count, Fn&& fn) {
    if (count <= 0) return;
    unsigned workers = std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    if (workers > 16) workers = 16;
    if (static_cast<std::int64_t>(workers) > count) workers = static_cast<unsigned>(count);
    if (workers <= 1) {
        for (std::int64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const std::int64_t chunk = (count + workers - 1) / workers;
    std::vector<std::future<void>> tasks;
    tasks.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        const std::int64_t lo = w * chunk;
        const std::int64_t hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        tasks.push_back(std::async(std::launch::async, [lo, hi, &fn] {
            for (std::int64_t i = lo; i < hi; ++i) fn(i);
        }));
    }
    for (auto& t : tasks) t.get();
}

} // namespace covertkey

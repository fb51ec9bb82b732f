#pragma once

#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

#include "rangepc/common.hpp"

namespace rangepc {

// Replica farm: runs fn(i) for i in [0, count) on `threads` workers and
// returns results in index order. Each replica derives its own rng stream
// from its index, so the output is identical for any thread count.
template <typename T, typename Fn>
std::vector<T> run_replicas(std::int64_t count, int threads, Fn&& fn) {
    require(count >= 0, "run_replicas: count must be >= 0");
    if (threads < 1) threads = 1;
    std::vector<T> results(static_cast<std::size_t>(count));
    if (count == 0) return results;
    if (threads == 1) {
        for (std::int64_t i = 0; i < count; ++i)
            results[static_cast<std::size_t>(i)] = fn(i);
        return results;
    }
    std::atomic<std::int64_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    std::atomic<bool> failed{false};
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&]() {
            for (;;) {
                std::int64_t i = next.fetch_add(1);
                if (i >= count || failed.load()) break;
                try {
                    results[static_cast<std::size_t>(i)] = fn(i);
                } catch (...) {
                    failed.store(true);
                    break;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    ensure(!failed.load(), "run_replicas: a replica threw");
    return results;
}

}  // namespace rangepc

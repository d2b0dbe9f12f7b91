#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace kinlim {

int hardware_threads();

// Calls f(i) for i in [0, n) on up to `threads` workers, in contiguous blocks.
// The first exception thrown by any worker is rethrown after all have joined.
template <class F>
void parallel_for(long n, int threads, F&& f) {
    if (n <= 0) return;
    const long workers = std::clamp<long>(threads, 1, n);
    if (workers == 1) {
        for (long i = 0; i < n; ++i) f(i);
        return;
    }
    std::exception_ptr error;
    std::mutex mu;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (long w = 0; w < workers; ++w) {
        const long lo = n * w / workers, hi = n * (w + 1) / workers;
        pool.emplace_back([&, lo, hi] {
            try {
                for (long i = lo; i < hi; ++i) f(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// Splits [0, n) into fixed chunks, folds each chunk into a fresh accumulator
// and merges the chunk results in index order, so the result does not depend
// on the number of threads.
template <class Acc, class Make, class Body, class Merge>
Acc chunked_reduce(long n, long chunk, int threads, Make&& make, Body&& body, Merge&& merge) {
    Acc total = make();
    if (n <= 0) return total;
    chunk = std::max(1L, chunk);
    const long chunks = (n + chunk - 1) / chunk;
    std::vector<std::optional<Acc>> parts(chunks);
    std::atomic<long> next{0};
    parallel_for(std::min<long>(threads, chunks), std::max(1, threads), [&](long) {
        for (long c = next++; c < chunks; c = next++) {
            Acc acc = make();
            const long hi = std::min(n, (c + 1) * chunk);
            for (long i = c * chunk; i < hi; ++i) body(acc, i);
            parts[c].emplace(std::move(acc));
        }
    });
    for (auto& p : parts) merge(total, *p);
    return total;
}

}  // namespace kinlim

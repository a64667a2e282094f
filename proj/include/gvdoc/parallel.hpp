#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace gvdoc {

// Worker-thread cap: GVDOC_THREADS env var when set, else hardware concurrency.
inline int thread_budget() {
    if (const char* env = std::getenv("GVDOC_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

// Runs make(i) for i in [0, n) on up to thread_budget() workers and feeds the
// results to consume(i, result) strictly in index order, so any reduction the
// consumer performs is deterministic regardless of thread count.
template <typename Result>
void parallel_for_ordered(int n,
                          const std::function<Result(int)>& make,
                          const std::function<void(int, Result&)>& consume) {
    int workers = std::min(thread_budget(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) {
            Result r = make(i);
            consume(i, r);
        }
        return;
    }

    std::vector<Result> results(static_cast<size_t>(n));
    std::vector<std::atomic<bool>> done(static_cast<size_t>(n));
    for (auto& d : done) d.store(false, std::memory_order_relaxed);
    std::atomic<int> next{0};
    std::vector<std::string> errors(static_cast<size_t>(workers));

    auto body = [&](int w) {
        for (;;) {
            int i = next.fetch_add(1);
            if (i >= n) break;
            try {
                results[static_cast<size_t>(i)] = make(i);
            } catch (const std::exception& e) {
                errors[static_cast<size_t>(w)] = e.what();
                done[static_cast<size_t>(i)].store(true, std::memory_order_release);
                break;
            }
            done[static_cast<size_t>(i)].store(true, std::memory_order_release);
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(body, w);
    for (auto& t : pool) t.join();

    for (const auto& e : errors)
        if (!e.empty()) throw std::runtime_error(e);
    for (int i = 0; i < n; ++i) consume(i, results[static_cast<size_t>(i)]);
}

}  // namespace gvdoc

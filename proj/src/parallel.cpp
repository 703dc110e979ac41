#include "adnet/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace adnet {

namespace {

int default_threads() {
    if (const char* env = std::getenv("ADNET_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return std::min(n, 256);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? int(hw) : 1;
}

int g_threads = default_threads();

} // namespace

int num_threads() { return g_threads; }

void set_num_threads(int n) { g_threads = n >= 1 ? std::min(n, 256) : default_threads(); }

void parallel_for(int64_t count, const std::function<void(int64_t)>& fn) {
    if (count <= 0) return;
    int workers = int(std::min<int64_t>(g_threads, count));
    if (workers <= 1) {
        for (int64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int64_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto run = [&]() {
        for (;;) {
            int64_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= count || failed.load(std::memory_order_relaxed)) return;
            try {
                fn(i);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(size_t(workers - 1));
    for (int t = 0; t < workers - 1; ++t) pool.emplace_back(run);
    run();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

void parallel_for_blocked(int64_t count, const std::function<void(int64_t, int64_t)>& fn) {
    constexpr int64_t kBlock = 16384;
    int64_t nblocks = (count + kBlock - 1) / kBlock;
    parallel_for(nblocks, [&](int64_t b) {
        fn(b * kBlock, std::min(count, (b + 1) * kBlock));
    });
}

} // namespace adnet

#include "stoplab/parallel.hpp"

#include <cmath>
#include <cstdlib>

namespace stoplab {

int default_thread_count() {
    if (const char* env = std::getenv("STOPLAB_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

int resolve_thread_count(int requested) {
    return requested >= 1 ? requested : default_thread_count();
}

void for_each_block(std::int64_t n, std::int64_t block_size, int threads,
                    const std::function<void(std::int64_t, std::int64_t, std::int64_t)>& fn) {
    const std::int64_t nblocks = block_count(n, block_size);
    if (nblocks <= 0) return;
    threads = static_cast<int>(std::max<std::int64_t>(
        1, std::min<std::int64_t>(threads, nblocks)));
    if (threads == 1) {
        for (std::int64_t bi = 0; bi < nblocks; ++bi) {
            const std::int64_t lo = bi * block_size;
            const std::int64_t hi = std::min(n, lo + block_size);
            fn(lo, hi, bi);
        }
        return;
    }
    std::atomic<std::int64_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::int64_t bi = next.fetch_add(1, std::memory_order_relaxed);
            if (bi >= nblocks) return;
            const std::int64_t lo = bi * block_size;
            const std::int64_t hi = std::min(n, lo + block_size);
            fn(lo, hi, bi);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads) - 1);
    for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
}

double MeanAccumulator::mean() const {
    NeumaierSum total;
    for (const auto& s : block_sum) total.add(s.value());
    return n > 0 ? total.value() / static_cast<double>(n) : 0.0;
}

double MeanAccumulator::standard_error() const {
    if (n < 2) return 0.0;
    NeumaierSum total, totalsq;
    for (const auto& s : block_sum) total.add(s.value());
    for (const auto& s : block_sumsq) totalsq.add(s.value());
    const double nn = static_cast<double>(n);
    const double mean = total.value() / nn;
    double var = (totalsq.value() - nn * mean * mean) / (nn - 1.0);
    if (var < 0.0) var = 0.0;
    return std::sqrt(var / nn);
}

} // namespace stoplab

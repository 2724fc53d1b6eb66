#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace stoplab {

// Thread count: explicit argument wins, then STOPLAB_THREADS, then hardware.
int default_thread_count();
int resolve_thread_count(int requested);

// Neumaier compensated summation. Used so that replicate means do not depend
// on aggregation order beyond the fixed block structure.
struct NeumaierSum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double x) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }

    double value() const { return sum + comp; }
};

// Runs fn(begin, end, block_index) over [0, n) split into fixed-size blocks.
// Blocks are claimed dynamically but identified by index, so per-block results
// can be combined in deterministic order afterwards.
void for_each_block(std::int64_t n, std::int64_t block_size, int threads,
                    const std::function<void(std::int64_t, std::int64_t, std::int64_t)>& fn);

inline std::int64_t block_count(std::int64_t n, std::int64_t block_size) {
    return (n + block_size - 1) / block_size;
}

// Mean/SE accumulated per block and combined in block order.
struct MeanAccumulator {
    std::vector<NeumaierSum> block_sum;
    std::vector<NeumaierSum> block_sumsq;
    std::int64_t n = 0;

    explicit MeanAccumulator(std::int64_t nblocks)
        : block_sum(static_cast<std::size_t>(nblocks)),
          block_sumsq(static_cast<std::size_t>(nblocks)) {}

    void add(std::int64_t block, double x) {
        block_sum[static_cast<std::size_t>(block)].add(x);
        block_sumsq[static_cast<std::size_t>(block)].add(x * x);
    }

    double mean() const;
    double standard_error() const;
};

} // namespace stoplab

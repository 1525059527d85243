#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dosefind/error.hpp"

namespace dosefind {

/// A run of pooled inputs produced by pool_adjacent_violators.
template <class Block>
struct PooledRun {
    Block block;
    std::size_t size = 1;  // number of consecutive inputs pooled into this run
};

/// Weighted pool-adjacent-violators.
///
/// `Block` is an accumulator for one input (or a pool of inputs) that supports
/// `a += b`. `greater(a, b)` must report whether the weighted mean of `a`
/// exceeds that of `b`. Returns the runs of the least-squares non-decreasing
/// fit, left to right; every input inside a run takes the run's mean.
template <class Block, class MeanGreater>
std::vector<PooledRun<Block>> pool_adjacent_violators(std::span<const Block> inputs, MeanGreater greater) {
    std::vector<PooledRun<Block>> runs;
    runs.reserve(inputs.size());
    for (const Block& b : inputs) {
        runs.push_back({b, 1});
        while (runs.size() >= 2 && greater(runs[runs.size() - 2].block, runs.back().block)) {
            PooledRun<Block> top = runs.back();
            runs.pop_back();
            runs.back().block += top.block;
            runs.back().size += top.size;
        }
    }
    return runs;
}

/// Weighted isotonic (non-decreasing) least-squares fit of `y` with positive
/// weights `w`.
inline std::vector<double> isotonic_regression(std::span<const double> y, std::span<const double> w) {
    DOSEFIND_REQUIRE(y.size() == w.size(), ErrorCode::InvalidInput, "isotonic_regression: size mismatch");
    struct Acc {
        double wy = 0.0;
        double w = 0.0;
        Acc& operator+=(const Acc& o) {
            wy += o.wy;
            w += o.w;
            return *this;
        }
    };
    std::vector<Acc> acc(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        DOSEFIND_REQUIRE(w[i] > 0.0, ErrorCode::InvalidInput, "isotonic_regression: weights must be positive");
        acc[i] = {w[i] * y[i], w[i]};
    }
    const auto runs = pool_adjacent_violators<Acc>(acc, [](const Acc& a, const Acc& b) { return a.wy * b.w > b.wy * a.w; });
    std::vector<double> out;
    out.reserve(y.size());
    for (const auto& r : runs) out.insert(out.end(), r.size, r.block.wy / r.block.w);
    return out;
}

}  // namespace dosefind

#pragma once

// Random dose-toxicity scenarios with Dirichlet-distributed increments.
//
// A Dirichlet vector w of length m+1 is split into the mass below d_1
// (w[0] = f[1]), the m-1 increments between adjacent levels, and the mass
// above d_m (w[m] = 1 - f[m]). Draws whose increments or edge masses fall
// outside the configured bounds are rejected.
//
// The default alpha pool, bounds and the 10-level skeleton below are this
// project's defaults, not published constants.

#include <cstdint>
#include <string>
#include <vector>

#include "dosefind/error.hpp"
#include "dosefind/model.hpp"
#include "dosefind/parallel.hpp"
#include "dosefind/rng.hpp"

namespace dosefind {

struct GenConfig {
    int m = 5;
    std::vector<std::vector<double>> alpha_pool;  // each of length m+1
    double inc_lo = 0.01;                         // bounds on the m-1 inter-level increments
    double inc_hi = 0.40;
    double edge_lo = 0.005;                       // bounds on f[1] and 1 - f[m]
    double edge_hi = 0.95;
    double p = 0.3;                               // target copied into every scenario
    std::size_t count = 2500;
    std::uint64_t seed = 1;
    int max_attempts = 10'000;
};

/// c * (a0, 1, ..., 1, am) for c in {1,2,5}, a0 and am in {0.5,1,2}: 27 vectors.
inline std::vector<std::vector<double>> default_alpha_pool(int m) {
    DOSEFIND_REQUIRE(m >= 2, ErrorCode::InvalidInput, "m: need at least 2 levels");
    std::vector<std::vector<double>> pool;
    for (double c : {1.0, 2.0, 5.0})
        for (double a0 : {0.5, 1.0, 2.0})
            for (double am : {0.5, 1.0, 2.0}) {
                std::vector<double> alpha(static_cast<std::size_t>(m + 1), c);
                alpha.front() = c * a0;
                alpha.back() = c * am;
                pool.push_back(std::move(alpha));
            }
    return pool;
}

inline GenConfig default_gen_config(int m, std::size_t count = 2500, std::uint64_t seed = 1) {
    GenConfig cfg;
    cfg.m = m;
    cfg.alpha_pool = default_alpha_pool(m);
    cfg.count = count;
    cfg.seed = seed;
    return cfg;
}

/// Power-model skeletons used for the Table 1 study: the common geometric
/// 5-level choice and a 10-level analogue.
inline std::vector<double> default_skeleton(int m) {
    if (m == 5) return {0.05, 0.1, 0.2, 0.4, 0.8};
    if (m == 10) return {0.02, 0.04, 0.07, 0.12, 0.20, 0.30, 0.42, 0.55, 0.70, 0.85};
    throw Error(ErrorCode::InvalidInput, "skeleton: no default for m=" + std::to_string(m) + "; pass one explicitly");
}

inline void validate(const GenConfig& c) {
    DOSEFIND_REQUIRE(c.m >= 2, ErrorCode::InvalidInput, "m: need at least 2 levels");
    DOSEFIND_REQUIRE(!c.alpha_pool.empty(), ErrorCode::InvalidInput, "alpha_pool: empty");
    for (std::size_t i = 0; i < c.alpha_pool.size(); ++i) {
        const auto& a = c.alpha_pool[i];
        DOSEFIND_REQUIRE(static_cast<int>(a.size()) == c.m + 1, ErrorCode::InvalidInput,
                         "alpha_pool[" + std::to_string(i) + "]: expected length m+1 = " + std::to_string(c.m + 1));
        for (double x : a)
            DOSEFIND_REQUIRE(x > 0.0, ErrorCode::InvalidInput, "alpha_pool[" + std::to_string(i) + "]: entries must be positive");
    }
    DOSEFIND_REQUIRE(0.0 < c.inc_lo && c.inc_lo < c.inc_hi && c.inc_hi < 1.0, ErrorCode::InvalidInput,
                     "increment bounds: need 0 < inc_lo < inc_hi < 1");
    DOSEFIND_REQUIRE((c.m + 1) * c.inc_lo < 1.0, ErrorCode::InvalidInput, "increment bounds: (m+1)*inc_lo must be < 1");
    DOSEFIND_REQUIRE(0.0 < c.edge_lo && c.edge_lo < c.edge_hi && c.edge_hi < 1.0, ErrorCode::InvalidInput,
                     "edge bounds: need 0 < edge_lo < edge_hi < 1");
    DOSEFIND_REQUIRE(c.p > 0.0 && c.p < 1.0, ErrorCode::InvalidInput, "p: target must lie in (0,1)");
    DOSEFIND_REQUIRE(c.max_attempts >= 1, ErrorCode::InvalidInput, "max_attempts must be >= 1");
}

struct GeneratedScenario {
    std::size_t id = 0;
    ToxScenario scenario;
    std::size_t alpha_index = 0;
    std::vector<double> alpha;
    int attempts = 0;             // Dirichlet draws consumed, accepted one included
    std::uint64_t stream_seed = 0;
};

/// One accepted scenario. The alpha vector is chosen once per scenario; only
/// the Dirichlet draw is repeated on rejection.
inline GeneratedScenario draw_scenario(const GenConfig& c, Rng& rng) {
    GeneratedScenario g;
    g.alpha_index = rng.index(c.alpha_pool.size());
    g.alpha = c.alpha_pool[g.alpha_index];
    for (int attempt = 1; attempt <= c.max_attempts; ++attempt) {
        const auto w = rng.dirichlet(g.alpha);
        bool ok = w.front() >= c.edge_lo && w.front() <= c.edge_hi && w.back() >= c.edge_lo && w.back() <= c.edge_hi;
        for (int j = 1; ok && j < c.m; ++j) ok = w[static_cast<std::size_t>(j)] >= c.inc_lo && w[static_cast<std::size_t>(j)] <= c.inc_hi;
        if (!ok) continue;
        std::vector<double> f(static_cast<std::size_t>(c.m));
        double cum = 0.0;
        for (int u = 0; u < c.m; ++u) {
            cum += w[static_cast<std::size_t>(u)];
            f[static_cast<std::size_t>(u)] = cum;
        }
        g.scenario = ToxScenario{std::move(f), c.p, {}};
        g.attempts = attempt;
        return g;
    }
    throw Error(ErrorCode::Infeasible, "infeasible bounds for alpha pool (alpha_pool[" + std::to_string(g.alpha_index) +
                                           "] rejected " + std::to_string(c.max_attempts) + " draws)");
}

struct Ensemble {
    std::vector<GeneratedScenario> scenarios;
    std::uint64_t total_attempts = 0;

    double acceptance_rate() const {
        return total_attempts == 0 ? 1.0 : static_cast<double>(scenarios.size()) / static_cast<double>(total_attempts);
    }
};

/// Scenario i is drawn from its own stream derived from (seed, i), so the
/// ensemble does not depend on the number of workers.
inline Ensemble gen_ensemble(const GenConfig& c, unsigned workers = 1) {
    validate(c);
    Ensemble e;
    e.scenarios.resize(c.count);
    parallel_for(c.count, workers, [&](std::size_t i) {
        const std::uint64_t seed = derive_seed(c.seed, StreamTag::Scenario, {static_cast<std::uint64_t>(c.m), i});
        Rng rng(seed);
        GeneratedScenario g = draw_scenario(c, rng);
        g.id = i;
        g.stream_seed = seed;
        g.scenario.label = "m" + std::to_string(c.m) + "-" + std::to_string(i);
        e.scenarios[i] = std::move(g);
    });
    for (const auto& g : e.scenarios) e.total_attempts += static_cast<std::uint64_t>(g.attempts);
    return e;
}

}  // namespace dosefind

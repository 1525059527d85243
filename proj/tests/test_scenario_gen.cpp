#include <gtest/gtest.h>

#include <cmath>

#include "dosefind/scenario_gen.hpp"

using namespace dosefind;

TEST(AlphaPool, DefaultHas27VectorsOfLengthMPlusOne) {
    const auto pool = default_alpha_pool(5);
    ASSERT_EQ(pool.size(), 27u);
    for (const auto& a : pool) {
        ASSERT_EQ(a.size(), 6u);
        for (std::size_t j = 1; j + 1 < a.size(); ++j) EXPECT_EQ(a[j], a[1]);
    }
    EXPECT_EQ(pool.front(), (std::vector<double>{0.5, 1, 1, 1, 1, 0.5}));
    EXPECT_EQ(pool.back(), (std::vector<double>{10, 5, 5, 5, 5, 10}));
}

TEST(DrawScenario, IncrementsAndEdgesRespectBounds) {
    for (int m : {5, 10}) {
        const GenConfig cfg = default_gen_config(m, 10'000, 2024);
        const auto e = gen_ensemble(cfg);
        ASSERT_EQ(e.scenarios.size(), 10'000u);
        for (const auto& g : e.scenarios) {
            const auto& f = g.scenario.f;
            ASSERT_EQ(static_cast<int>(f.size()), m);
            EXPECT_NO_THROW(validate(g.scenario));
            EXPECT_GE(f.front(), cfg.edge_lo);
            EXPECT_LE(f.front(), cfg.edge_hi);
            EXPECT_GE(1.0 - f.back(), cfg.edge_lo - 1e-15);
            EXPECT_LE(1.0 - f.back(), cfg.edge_hi + 1e-15);
            for (std::size_t u = 1; u < f.size(); ++u) {
                // f is a running sum of the increments, so allow a few ulps.
                EXPECT_GE(f[u] - f[u - 1], cfg.inc_lo - 1e-12);
                EXPECT_LE(f[u] - f[u - 1], cfg.inc_hi + 1e-12);
            }
            EXPECT_EQ(g.alpha, cfg.alpha_pool[g.alpha_index]);
            EXPECT_GE(g.attempts, 1);
        }
    }
}

TEST(GenEnsemble, SameSeedIsBitIdentical) {
    const auto a = gen_ensemble(default_gen_config(5, 500, 42));
    const auto b = gen_ensemble(default_gen_config(5, 500, 42));
    const auto c = gen_ensemble(default_gen_config(5, 500, 43));
    ASSERT_EQ(a.scenarios.size(), b.scenarios.size());
    bool any_diff = false;
    for (std::size_t i = 0; i < a.scenarios.size(); ++i) {
        EXPECT_EQ(a.scenarios[i].scenario.f, b.scenarios[i].scenario.f);
        EXPECT_EQ(a.scenarios[i].stream_seed, b.scenarios[i].stream_seed);
        any_diff = any_diff || a.scenarios[i].scenario.f != c.scenarios[i].scenario.f;
    }
    EXPECT_TRUE(any_diff);
    EXPECT_EQ(a.total_attempts, b.total_attempts);
}

TEST(GenEnsemble, IndependentOfWorkerCount) {
    const auto cfg = default_gen_config(10, 400, 5);
    const auto one = gen_ensemble(cfg, 1);
    for (unsigned w : {2u, 3u, 8u}) {
        const auto many = gen_ensemble(cfg, w);
        ASSERT_EQ(many.scenarios.size(), one.scenarios.size());
        for (std::size_t i = 0; i < one.scenarios.size(); ++i) {
            EXPECT_EQ(many.scenarios[i].scenario.f, one.scenarios[i].scenario.f);
            EXPECT_EQ(many.scenarios[i].alpha_index, one.scenarios[i].alpha_index);
            EXPECT_EQ(many.scenarios[i].id, i);
        }
    }
}

TEST(GenEnsemble, PrefixIsStableWhenCountGrows) {
    const auto small = gen_ensemble(default_gen_config(5, 50, 8));
    const auto large = gen_ensemble(default_gen_config(5, 200, 8));
    for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(small.scenarios[i].scenario.f, large.scenarios[i].scenario.f);
}

TEST(GenEnsemble, CountZeroIsEmpty) {
    const auto e = gen_ensemble(default_gen_config(5, 0, 1));
    EXPECT_TRUE(e.scenarios.empty());
    EXPECT_EQ(e.acceptance_rate(), 1.0);
}

TEST(GenEnsemble, PaperSizedEnsemble) {
    const auto e = gen_ensemble(default_gen_config(5, 2500, 1));
    EXPECT_EQ(e.scenarios.size(), 2500u);
    EXPECT_GT(e.acceptance_rate(), 0.0);
    EXPECT_LE(e.acceptance_rate(), 1.0);
    EXPECT_GE(e.total_attempts, 2500u);
    EXPECT_EQ(e.scenarios[17].scenario.label, "m5-17");
}

TEST(DrawScenario, InfeasibleBoundsReportTheAlphaPool) {
    GenConfig cfg = default_gen_config(5, 3, 1);
    // Four interior increments in [0.15, 0.16] leave at least 0.36 for two edges capped at 0.011.
    cfg.inc_lo = 0.15;
    cfg.inc_hi = 0.16;
    cfg.edge_hi = 0.011;
    cfg.max_attempts = 200;
    try {
        gen_ensemble(cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Infeasible);
        EXPECT_NE(std::string(e.what()).find("infeasible bounds for alpha pool"), std::string::npos);
    }
}

TEST(GenConfigValidation, RejectsBadConfigs) {
    GenConfig c = default_gen_config(5);
    c.alpha_pool[3].pop_back();
    EXPECT_THROW(validate(c), Error);
    c = default_gen_config(5);
    c.alpha_pool[0][2] = 0.0;
    EXPECT_THROW(validate(c), Error);
    c = default_gen_config(5);
    c.inc_lo = 0.2;  // 6 * 0.2 >= 1
    c.inc_hi = 0.3;
    EXPECT_THROW(validate(c), Error);
    c = default_gen_config(5);
    c.inc_hi = c.inc_lo;
    EXPECT_THROW(validate(c), Error);
    EXPECT_THROW(default_alpha_pool(1), Error);
    EXPECT_THROW(default_skeleton(7), Error);
}

TEST(Dirichlet, ComponentMeansMatchClosedForm) {
    // Sampler check against E[w_j] = alpha_j / sum(alpha), within 3 standard errors.
    const std::vector<std::vector<double>> alphas{{0.5, 1, 1, 1, 2}, {5, 5, 2.5, 10}, {1, 1}};
    Rng rng(77);
    const int draws = 40'000;
    for (const auto& a : alphas) {
        double a0 = 0;
        for (double x : a) a0 += x;
        std::vector<double> sum(a.size(), 0.0);
        for (int i = 0; i < draws; ++i) {
            const auto w = rng.dirichlet(a);
            double total = 0;
            for (std::size_t j = 0; j < a.size(); ++j) {
                sum[j] += w[j];
                total += w[j];
                EXPECT_GT(w[j], 0.0);
            }
            EXPECT_NEAR(total, 1.0, 1e-12);
        }
        for (std::size_t j = 0; j < a.size(); ++j) {
            const double mean = a[j] / a0;
            const double var = a[j] * (a0 - a[j]) / (a0 * a0 * (a0 + 1));
            const double se = std::sqrt(var / draws);
            EXPECT_NEAR(sum[j] / draws, mean, 3 * se) << "component " << j;
        }
    }
}

TEST(Dirichlet, PooledMixtureMeanMatchesPoolAverage) {
    // Unconstrained draws through the scenario pipeline's alpha choice: the
    // increment means should match the pool-averaged Dirichlet expectation.
    const auto pool = default_alpha_pool(5);
    std::vector<double> expect(6, 0.0);
    for (const auto& a : pool) {
        double a0 = 0;
        for (double x : a) a0 += x;
        for (std::size_t j = 0; j < a.size(); ++j) expect[j] += a[j] / a0 / static_cast<double>(pool.size());
    }
    Rng rng(derive_seed(9, StreamTag::Scenario, {0}));
    const int draws = 60'000;
    std::vector<double> sum(6, 0.0), sq(6, 0.0);
    for (int i = 0; i < draws; ++i) {
        const auto w = rng.dirichlet(pool[rng.index(pool.size())]);
        for (std::size_t j = 0; j < 6; ++j) {
            sum[j] += w[j];
            sq[j] += w[j] * w[j];
        }
    }
    for (std::size_t j = 0; j < 6; ++j) {
        const double mean = sum[j] / draws;
        const double se = std::sqrt((sq[j] / draws - mean * mean) / draws);
        EXPECT_NEAR(mean, expect[j], 3 * se) << "component " << j;
    }
}

TEST(Rng, IndexIsUniformAndSeedsDiffer) {
    Rng rng(1);
    std::vector<int> hist(27, 0);
    for (int i = 0; i < 27'000; ++i) ++hist[rng.index(27)];
    for (int h : hist) EXPECT_NEAR(h, 1000, 4 * std::sqrt(1000.0));
    EXPECT_NE(derive_seed(1, StreamTag::Scenario, {5, 0}), derive_seed(1, StreamTag::Scenario, {5, 1}));
    EXPECT_NE(derive_seed(1, StreamTag::Scenario, {0}), derive_seed(1, StreamTag::Replication, {0}));
    EXPECT_EQ(derive_seed(3, StreamTag::Session, {7}), derive_seed(3, StreamTag::Session, {7}));
}

#include <gtest/gtest.h>

#include <cmath>

#include "dosefind/scenario_gen.hpp"
#include "dosefind/simulator.hpp"

using namespace dosefind;

namespace {

DesignSpec interval_spec(double dp = 0.1) {
    DesignSpec d;
    d.kind = DesignKind::Interval;
    d.p = 0.3;
    d.dp1 = d.dp2 = dp;
    return d;
}

DesignSpec point_spec(int cohort = 1) {
    DesignSpec d;
    d.kind = DesignKind::Point;
    d.p = 0.3;
    d.cohort = cohort;
    return d;
}

TrialTrace trace_of(std::vector<int> doses) {
    TrialTrace t;
    t.doses = std::move(doses);
    t.outcomes.assign(t.doses.size(), 0);
    return t;
}

}  // namespace

TEST(RunTrial, DeterministicCurveEscalatesThenOscillates) {
    const ToxScenario s{{0.0, 0.0, 1.0}, 0.3, "det"};
    const auto t = run_trial(s, interval_spec(), 12, 1);
    EXPECT_EQ(t.doses, (std::vector<int>{1, 2, 3, 2, 3, 2, 3, 2, 3, 2, 3, 2}));
    EXPECT_EQ(t.outcomes, (std::vector<std::uint8_t>{0, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0}));
    EXPECT_EQ(t.scenario_id, "det");
    // Same trace under any seed: the draws are degenerate.
    EXPECT_EQ(run_trial(s, interval_spec(), 12, 987).doses, t.doses);
    const auto ls = estimate_limit_set(run_trial(s, interval_spec(), 1000, 3));
    EXPECT_EQ(ls.s1, 2);
    EXPECT_EQ(ls.s2, 3);
    EXPECT_FALSE(ls.settled);
}

TEST(RunTrial, SingleSubjectStaysAtStart) {
    DesignSpec spec = interval_spec();
    spec.start = 2;
    const auto t = run_trial(make_scenario({0.1, 0.3, 0.5}, 0.3), spec, 1, 4);
    ASSERT_EQ(t.size(), 1u);
    EXPECT_EQ(t.doses[0], 2);
    EXPECT_EQ(t.final_state.size(), 1u);
}

TEST(RunTrial, ReplayIsExactForEveryDesign) {
    const auto s = make_scenario({0.05, 0.12, 0.28, 0.45, 0.7}, 0.3, "r");
    DesignSpec crm;
    crm.kind = DesignKind::Crm;
    crm.skeleton = {0.05, 0.1, 0.2, 0.4, 0.8};
    crm.cohort = 3;
    DesignSpec mono = interval_spec();
    mono.interval_monotonized = true;
    for (const DesignSpec& spec : {interval_spec(), mono, point_spec(2), crm}) {
        const auto a = run_trial(s, spec, 300, 55);
        const auto b = run_trial(s, spec, 300, 55);
        EXPECT_EQ(a.doses, b.doses);
        EXPECT_EQ(a.outcomes, b.outcomes);
        EXPECT_EQ(a.recommended, b.recommended);
        EXPECT_EQ(a.seed, 55u);
        ASSERT_EQ(a.size(), 300u);
        // The final state replays from the recorded trace.
        std::vector<Observation> hist;
        for (std::size_t i = 0; i < a.size(); ++i) hist.push_back({a.doses[i], a.outcomes[i] != 0});
        const auto replayed = TrialState::replay(5, a.final_state.current(), hist);
        EXPECT_EQ(replayed.n(), a.final_state.n());
        EXPECT_EQ(replayed.tox(), a.final_state.tox());
        EXPECT_EQ(a.recommended, recommend_mtd(replayed, spec));
    }
}

TEST(RunTrial, OneUniformPerSubjectInTraceOrder) {
    // Common random numbers: outcomes equal u_i < f[dose_i] for the stream's i-th uniform.
    const auto s = make_scenario({0.1, 0.25, 0.4, 0.6}, 0.3);
    const auto t = run_trial(s, point_spec(3), 200, 99);
    Rng rng(99);
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(t.outcomes[i] != 0, rng.uniform() < s.at(t.doses[i]));
}

TEST(RunTrial, CohortsShareADoseAndLastCohortIsTruncated) {
    DesignSpec spec = point_spec(3);
    const auto t = run_trial(make_scenario({0.1, 0.3, 0.5}, 0.3), spec, 10, 12);
    ASSERT_EQ(t.size(), 10u);
    for (std::size_t c = 0; c < 3; ++c) {
        EXPECT_EQ(t.doses[3 * c], t.doses[3 * c + 1]);
        EXPECT_EQ(t.doses[3 * c], t.doses[3 * c + 2]);
    }
}

TEST(RunTrial, IntervalTracesNeverSkip) {
    const auto e = gen_ensemble(default_gen_config(10, 40, 6));
    for (const auto& g : e.scenarios) {
        for (int cohort : {1, 3}) {
            DesignSpec spec = interval_spec(0.05);
            spec.cohort = cohort;
            const auto t = run_trial(g.scenario, spec, 2000, g.id);
            for (std::size_t i = 1; i < t.size(); ++i) ASSERT_LE(std::abs(t.doses[i] - t.doses[i - 1]), 1);
        }
    }
}

TEST(RunTrial, RejectsEmptyRunAndInvalidSpec) {
    const auto s = make_scenario({0.1, 0.3}, 0.3);
    EXPECT_THROW(run_trial(s, interval_spec(), 0, 1), Error);
    DesignSpec bad = interval_spec();
    bad.start = 3;
    EXPECT_THROW(run_trial(s, bad, 10, 1), Error);
}

TEST(LimitSet, TailAtOneLevelIsSettled) {
    const auto ls = estimate_limit_set(trace_of({1, 2, 3, 3, 3, 3, 3, 3, 3, 3}), 0.5);
    EXPECT_EQ(ls.s1, 3);
    EXPECT_EQ(ls.s2, 3);
    EXPECT_TRUE(ls.settled);
    EXPECT_EQ(ls.window, 5u);
}

TEST(LimitSet, AlternatingTailIsAPair) {
    const auto ls = estimate_limit_set(trace_of({1, 2, 3, 2, 3, 2, 3, 2, 3, 2}), 0.4);
    EXPECT_EQ(ls.s1, 2);
    EXPECT_EQ(ls.s2, 3);
    EXPECT_FALSE(ls.settled);
}

TEST(LimitSet, WholeTraceOfEscalationSpansAllLevels) {
    const auto ls = estimate_limit_set(trace_of({1, 2, 3, 4, 5}), 1.0);
    EXPECT_EQ(ls.s1, 1);
    EXPECT_EQ(ls.s2, 5);
}

TEST(LimitSet, WindowIsCeilingOfFraction) {
    EXPECT_EQ(estimate_limit_set(trace_of(std::vector<int>(20'000, 1)), 0.1).window, 2000u);
    EXPECT_EQ(estimate_limit_set(trace_of(std::vector<int>(15, 1)), 0.1).window, 2u);
    EXPECT_EQ(estimate_limit_set(trace_of({1}), 0.1).window, 1u);
    EXPECT_THROW(estimate_limit_set(trace_of({}), 0.1), Error);
    EXPECT_THROW(estimate_limit_set(trace_of({1}), 0.0), Error);
}

TEST(EstimateConsistency, FixedDoseEstimateIsWithinTolerance) {
    // One level, so every subject is treated at f = 0.3. Binomial SE at n = 10,000 is 0.00458.
    const ToxScenario s{{0.3}, 0.3, "single"};
    int within = 0;
    const int runs = 200;
    for (int r = 0; r < runs; ++r) {
        const auto t = run_trial(s, interval_spec(), 10'000, derive_seed(5, StreamTag::Replication, {0, static_cast<std::uint64_t>(r)}));
        const auto errs = lemma1_check(t, s);
        ASSERT_EQ(errs.size(), 1u);
        EXPECT_EQ(errs[0].n, 10'000);
        within += errs[0].abs_error < 0.02;
    }
    EXPECT_GE(within, runs * 99 / 100);
}

TEST(EstimateConsistency, ThresholdExcludesSparseLevelsAndDegenerateLevelIsExact) {
    const ToxScenario s{{0.0, 0.0, 1.0}, 0.3, {}};
    const auto t = run_trial(s, interval_spec(), 203, 1);
    const auto errs = lemma1_check(t, s, 50);
    // Level 1 has one subject and is dropped; levels 2 and 3 split the rest.
    ASSERT_EQ(errs.size(), 2u);
    EXPECT_EQ(errs[0].level, 2);
    EXPECT_EQ(errs[0].abs_error, 0.0);
    EXPECT_EQ(errs[1].level, 3);
    EXPECT_EQ(errs[1].abs_error, 0.0);
    EXPECT_TRUE(lemma1_check(t, s, 1000).empty());
}

TEST(EstimateConsistency, ErrorShrinksWithSubjects) {
    const auto s = make_scenario({0.05, 0.1, 0.3, 0.5, 0.7}, 0.3);
    double small_n = 0, large_n = 0;
    for (std::uint64_t r = 0; r < 40; ++r) {
        const auto a = run_trial(s, interval_spec(), 1'000, r);
        const auto b = run_trial(s, interval_spec(), 20'000, r);
        small_n += std::fabs(static_cast<double>(a.final_state.tox_at(3)) / static_cast<double>(a.final_state.n_at(3)) - 0.3);
        large_n += std::fabs(static_cast<double>(b.final_state.tox_at(3)) / static_cast<double>(b.final_state.n_at(3)) - 0.3);
    }
    EXPECT_LT(large_n, small_n);
}

TEST(Counterexample, CanonicalPathBound) {
    const auto s = make_scenario({0.1, 0.3}, 0.3);
    EXPECT_NEAR(canonical_trap_path_probability(s, 1, 1, 2), 0.27, 1e-15);
    EXPECT_NEAR(canonical_trap_path_probability(s, 1, 2, 2), 0.81 * 0.09, 1e-15);
}

TEST(Counterexample, TrapFrequencyMeetsBound) {
    const auto s = make_scenario({0.1, 0.3}, 0.3);
    const auto r = counterexample_point(s, point_spec(1), 500, 8000, 11);
    EXPECT_EQ(r.trap_level, 2);
    EXPECT_DOUBLE_EQ(r.lower_bound, 0.27);
    EXPECT_GE(r.trap_frequency, r.lower_bound - 3 * r.mc_se) << r.trap_frequency;
    EXPECT_GT(r.mc_se, 0.0);

    const auto r2 = counterexample_point(s, point_spec(2), 500, 8000, 12);
    EXPECT_NEAR(r2.lower_bound, 0.0729, 1e-12);
    EXPECT_GE(r2.trap_frequency, r2.lower_bound - 3 * r2.mc_se) << r2.trap_frequency;
}

TEST(Counterexample, ImpossibleToxicityNeverTraps) {
    const ToxScenario s{{0.0, 0.0, 0.9}, 0.3, {}};
    const auto r = counterexample_point(s, point_spec(1), 200, 2000, 3, 2);
    EXPECT_EQ(r.traps, 0u);
    EXPECT_EQ(r.trap_frequency, 0.0);
    EXPECT_EQ(r.lower_bound, 0.0);
}

TEST(Counterexample, IndependentOfWorkers) {
    const auto s = make_scenario({0.1, 0.3}, 0.3);
    const auto a = counterexample_point(s, point_spec(1), 100, 3000, 8, 2, 1);
    const auto b = counterexample_point(s, point_spec(1), 100, 3000, 8, 2, 4);
    EXPECT_EQ(a.traps, b.traps);
}

TEST(Counterexample, RejectsInvalidSetups) {
    const auto s = make_scenario({0.1, 0.3}, 0.3);
    EXPECT_THROW(counterexample_point(s, interval_spec(), 100, 10, 1), Error);
    DesignSpec high = point_spec();
    high.p = 0.6;
    EXPECT_THROW(counterexample_point(make_scenario({0.3, 0.6}, 0.6), high, 100, 10, 1), Error);
    EXPECT_THROW(counterexample_point(make_scenario({0.35, 0.6}, 0.3), point_spec(), 100, 10, 1), Error);
}

TEST(Table1, SingleScenarioFillsOneCell) {
    // Pick the first generated scenario that is CRM No2plus and CCD Yes at +-0.1.
    const auto skel = default_skeleton(5);
    const auto e = gen_ensemble(default_gen_config(5, 2500, 1));
    std::optional<ToxScenario> pick;
    for (const auto& g : e.scenarios) {
        const int u = mtd_index(g.scenario);
        if (crm_classify(crm_nominations(g.scenario, skel), u).cls == CrmClass::No2plus &&
            ccd_classify(g.scenario, 0.1, 0.1).cls == CcdClass::Yes) {
            pick = g.scenario;
            break;
        }
    }
    ASSERT_TRUE(pick);
    const std::vector<ToxScenario> one{*pick};
    const std::vector<double> widths{0.1};
    const auto t = table1_crosstab(one, widths, skel, 0.3);
    for (std::size_t r = 0; r < kCrmRows.size(); ++r)
        for (std::size_t c = 0; c < kCcdCols.size(); ++c) {
            const bool hit = kCrmRows[r] == CrmClass::No2plus && kCcdCols[c] == CcdClass::Yes;
            EXPECT_EQ(t.percent(t.counts[0][r][c]), hit ? 100.0 : 0.0);
        }
}

TEST(Table1, MarginsSumToHundredAndWorkersAgree) {
    const auto skel = default_skeleton(10);
    const auto e = gen_ensemble(default_gen_config(10, 600, 2));
    std::vector<ToxScenario> s;
    for (const auto& g : e.scenarios) s.push_back(g.scenario);
    const std::vector<double> widths{0.1, 0.05};
    const auto t = table1_crosstab(s, widths, skel, 0.3, 1);
    const auto t4 = table1_crosstab(s, widths, skel, 0.3, 4);
    EXPECT_EQ(t.counts, t4.counts);
    double crm = 0;
    for (auto c : kCrmRows) crm += t.crm_margin_pct(c);
    EXPECT_NEAR(crm, 100.0, 1e-9);
    for (std::size_t w = 0; w < widths.size(); ++w) {
        double ccd = 0;
        for (auto c : kCcdCols) ccd += t.ccd_margin_pct(w, c);
        EXPECT_NEAR(ccd, 100.0, 1e-9);
    }
    for (const auto& v : t.rows) EXPECT_GE(v.misspecification, 0.0);
}

TEST(Empirics, YesScenarioSettlesAtMtd) {
    const std::vector<ToxScenario> s{make_scenario({0.05, 0.1, 0.3, 0.5, 0.7}, 0.3),
                                     make_scenario({0.05, 0.1, 0.45, 0.6, 0.8}, 0.3),
                                     make_scenario({0.05, 0.25, 0.35, 0.6, 0.8}, 0.3)};
    EmpiricsConfig cfg;
    cfg.n = 5000;
    cfg.replications = 20;
    const auto rep = convergence_empirics(s, interval_spec(), cfg);
    ASSERT_EQ(rep.scenarios.size(), 3u);
    EXPECT_EQ(rep.scenarios[0].verdict.cls, CcdClass::Yes);
    EXPECT_GE(rep.scenarios[0].settled_at_mtd, 0.9);
    EXPECT_EQ(rep.scenarios[1].verdict.cls, CcdClass::No0);
    EXPECT_GE(rep.scenarios[1].matches_oscillation, 0.9);
    EXPECT_EQ(rep.scenarios[2].verdict.cls, CcdClass::No2plus);
    EXPECT_GE(rep.scenarios[2].settled_in_interval, 0.9);
    for (const auto& sc : rep.scenarios) EXPECT_EQ(sc.skip_violations, 0u);
    EXPECT_EQ(rep.class_count(CcdClass::Yes), 1u);
    EXPECT_DOUBLE_EQ(rep.class_mean(CcdClass::Yes, [](const ScenarioEmpirics& x) { return x.settled_at_mtd; }),
                     rep.scenarios[0].settled_at_mtd);
    for (double err : rep.scenarios[0].mtd_errors) EXPECT_LT(err, 0.05);

    cfg.workers = 3;
    const auto again = convergence_empirics(s, interval_spec(), cfg);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(again.scenarios[i].settled_at_mtd, rep.scenarios[i].settled_at_mtd);
}

TEST(Empirics, SettlingDoesNotDegradeWithMoreSubjects) {
    // Yes-class scenarios with the MTD near an interval endpoint settle more slowly.
    const std::vector<ToxScenario> s{make_scenario({0.05, 0.12, 0.23, 0.5, 0.7}, 0.3),
                                     make_scenario({0.1, 0.18, 0.38, 0.55}, 0.3)};
    EmpiricsConfig cfg;
    cfg.replications = 60;
    cfg.n = 2000;
    const auto small = convergence_empirics(s, interval_spec(), cfg);
    cfg.n = 20'000;
    const auto large = convergence_empirics(s, interval_spec(), cfg);
    for (std::size_t i = 0; i < s.size(); ++i) {
        ASSERT_EQ(small.scenarios[i].verdict.cls, CcdClass::Yes);
        const double a = small.scenarios[i].settled_at_mtd;
        const double b = large.scenarios[i].settled_at_mtd;
        const double se = std::sqrt((a * (1 - a) + b * (1 - b)) / static_cast<double>(cfg.replications));
        EXPECT_GE(b, a - 2 * se) << "scenario " << i;
    }
}

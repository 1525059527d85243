#pragma once

// Seeded Monte Carlo trials and the empirical checks built on them.
//
// Each trial consumes exactly one uniform draw per subject, in treatment
// order, from a stream identified by a 64-bit seed; a trace is therefore
// replayable from (scenario, design, n, seed). Replication seeds are derived
// from (master seed, scenario id, replication id).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dosefind/convergence.hpp"
#include "dosefind/designs.hpp"
#include "dosefind/error.hpp"
#include "dosefind/model.hpp"
#include "dosefind/parallel.hpp"
#include "dosefind/rng.hpp"

namespace dosefind {

struct TrialTrace {
    std::string scenario_id;
    DesignSpec spec;
    std::uint64_t seed = 0;
    std::vector<int> doses;
    std::vector<std::uint8_t> outcomes;
    TrialState final_state;
    int recommended = 1;

    std::size_t size() const { return doses.size(); }
};

/// Runs n subjects in cohorts of spec.cohort starting at spec.start. A final
/// cohort is truncated if n is not a multiple of the cohort size.
inline TrialTrace run_trial(const ToxScenario& scenario, const DesignSpec& spec, std::size_t n, std::uint64_t seed) {
    DOSEFIND_REQUIRE(n >= 1, ErrorCode::InvalidInput, "n: need at least one subject");
    validate_probabilities(scenario);
    validate(spec, scenario.m());

    Rng rng(seed);
    const int m = scenario.m();
    TrialState state(m, spec.start);
    state.reserve(n);
    const bool fast_interval = spec.kind == DesignKind::Interval && !spec.interval_monotonized;
    const IntervalRule rule(spec.kind == DesignKind::Interval ? IntervalRule(spec) : IntervalRule(0.5, 0.1, 0.1));

    std::size_t given = 0;
    while (given < n) {
        const int dose = state.current();
        const double prob = scenario.at(dose);
        const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(spec.cohort), n - given);
        for (std::size_t j = 0; j < k; ++j) state.record(dose, rng.bernoulli(prob));
        given += k;
        if (given >= n) break;
        const int next = fast_interval ? rule.next(dose, m, state.tox_at(dose), state.n_at(dose)) : next_dose(state, spec);
        state.move_to(next);
    }

    TrialTrace t;
    t.scenario_id = scenario.label;
    t.spec = spec;
    t.seed = seed;
    t.doses.reserve(n);
    t.outcomes.reserve(n);
    for (const auto& o : state.history()) {
        t.doses.push_back(o.level);
        t.outcomes.push_back(o.toxic ? 1 : 0);
    }
    t.recommended = recommend_mtd(state, spec);
    t.final_state = std::move(state);
    return t;
}

struct LimitSetEstimate {
    int s1 = 1;
    int s2 = 1;
    bool settled = true;
    double tail_fraction = 0.1;
    std::size_t window = 0;  // subjects examined
};

/// Range of levels visited in the last ceil(tail_fraction * n) subjects.
inline LimitSetEstimate estimate_limit_set(const TrialTrace& trace, double tail_fraction = 0.1) {
    DOSEFIND_REQUIRE(!trace.doses.empty(), ErrorCode::NoData, "limit set of an empty trace");
    DOSEFIND_REQUIRE(tail_fraction > 0.0 && tail_fraction <= 1.0, ErrorCode::InvalidInput, "tail fraction must lie in (0,1]");
    const std::size_t n = trace.doses.size();
    auto window = static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(n) - 1e-9));
    window = std::clamp<std::size_t>(window, 1, n);
    const auto first = trace.doses.end() - static_cast<std::ptrdiff_t>(window);
    const auto [lo, hi] = std::minmax_element(first, trace.doses.end());
    return {*lo, *hi, *lo == *hi, tail_fraction, window};
}

struct LevelError {
    int level = 1;
    std::int64_t n = 0;
    double estimate = 0.0;
    double truth = 0.0;
    double abs_error = 0.0;
};

/// |F_hat - f| at every level that received at least `min_subjects`.
inline std::vector<LevelError> lemma1_check(const TrialTrace& trace, const ToxScenario& scenario, std::int64_t min_subjects = 50) {
    DOSEFIND_REQUIRE(!trace.doses.empty(), ErrorCode::NoData, "lemma1_check on an empty trace");
    const TrialState& s = trace.final_state;
    std::vector<LevelError> out;
    for (int u = 1; u <= s.m(); ++u) {
        if (s.n_at(u) < min_subjects) continue;
        const double est = static_cast<double>(s.tox_at(u)) / static_cast<double>(s.n_at(u));
        out.push_back({u, s.n_at(u), est, scenario.at(u), std::fabs(est - scenario.at(u))});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Point-design trap

struct CounterexampleResult {
    int trap_level = 1;
    std::size_t replications = 0;
    std::size_t traps = 0;
    double trap_frequency = 0.0;
    double lower_bound = 0.0;  // probability of the canonical trap path
    double mc_se = 0.0;        // binomial standard error of trap_frequency
};

/// Probability that the trial climbs from the start dose with all-non-toxic
/// cohorts and then sees an all-toxic first cohort at `trap_level`.
inline double canonical_trap_path_probability(const ToxScenario& s, int start, int cohort, int trap_level) {
    double prob = 1.0;
    for (int u = start; u < trap_level; ++u) prob *= std::pow(1.0 - s.at(u), cohort);
    return prob * std::pow(s.at(trap_level), cohort);
}

/// Fraction of point-design trials in which `trap_level` receives exactly one
/// cohort, all toxic (estimate pinned at 1), and is never allocated again.
inline CounterexampleResult counterexample_point(const ToxScenario& scenario, const DesignSpec& spec, std::size_t n,
                                                 std::size_t replications, std::uint64_t seed, int trap_level,
                                                 unsigned workers = 1) {
    DOSEFIND_REQUIRE(spec.kind == DesignKind::Point, ErrorCode::InvalidInput, "counterexample: design must be point");
    DOSEFIND_REQUIRE(spec.p < 0.5, ErrorCode::InvalidInput, "counterexample: requires p < 1/2");
    DOSEFIND_REQUIRE(trap_level >= 2 && trap_level <= scenario.m(), ErrorCode::InvalidInput,
                     "counterexample: trap level must have a level below it");
    DOSEFIND_REQUIRE(spec.start <= trap_level, ErrorCode::InvalidInput, "counterexample: start must not be above the trap level");
    DOSEFIND_REQUIRE(replications >= 1, ErrorCode::InvalidInput, "counterexample: need at least one replication");
    validate_probabilities(scenario);

    std::vector<std::uint8_t> trapped(replications, 0);
    parallel_for(replications, workers, [&](std::size_t r) {
        const auto t = run_trial(scenario, spec, n, derive_seed(seed, StreamTag::Counterexample, {r}));
        const auto& s = t.final_state;
        trapped[r] = s.n_at(trap_level) == spec.cohort && s.tox_at(trap_level) == spec.cohort;
    });

    CounterexampleResult res;
    res.trap_level = trap_level;
    res.replications = replications;
    for (auto x : trapped) res.traps += x;
    res.trap_frequency = static_cast<double>(res.traps) / static_cast<double>(replications);
    res.lower_bound = canonical_trap_path_probability(scenario, spec.start, spec.cohort, trap_level);
    res.mc_se = std::sqrt(res.trap_frequency * (1.0 - res.trap_frequency) / static_cast<double>(replications));
    return res;
}

/// Uses the scenario's MTD as the trap level.
inline CounterexampleResult counterexample_point(const ToxScenario& scenario, const DesignSpec& spec, std::size_t n,
                                                 std::size_t replications, std::uint64_t seed, unsigned workers = 1) {
    const int u_star = mtd_index(scenario);
    DOSEFIND_REQUIRE(u_star >= 2 && scenario.at(u_star - 1) < spec.p, ErrorCode::InvalidInput,
                     "counterexample: needs f below p at the level under the MTD");
    return counterexample_point(scenario, spec, n, replications, seed, u_star, workers);
}

// ---------------------------------------------------------------------------
// Table 1 cross-tabulation

constexpr std::array<CrmClass, 5> kCrmRows = {CrmClass::No0, CrmClass::No2plus, CrmClass::Funneling, CrmClass::Yes,
                                              CrmClass::NoFunneling};
constexpr std::array<CcdClass, 3> kCcdCols = {CcdClass::No0, CcdClass::No2plus, CcdClass::Yes};

struct ScenarioVerdicts {
    int mtd = 1;
    CrmClass crm = CrmClass::NoFunneling;
    std::vector<CcdClass> ccd;  // one per interval width
    double misspecification = 0.0;
};

struct Table1 {
    int m = 0;
    double p = 0.3;
    std::vector<double> widths;
    std::vector<double> skeleton;
    std::vector<ScenarioVerdicts> rows;
    // counts[w][crm row][ccd col]
    std::vector<std::array<std::array<std::size_t, 3>, 5>> counts;

    std::size_t total() const { return rows.size(); }
    double percent(std::size_t c) const { return total() == 0 ? 0.0 : 100.0 * static_cast<double>(c) / static_cast<double>(total()); }
    std::size_t crm_margin(std::size_t row) const {
        std::size_t s = 0;
        for (auto c : counts.front()[row]) s += c;
        return s;
    }
    std::size_t ccd_margin(std::size_t w, std::size_t col) const {
        std::size_t s = 0;
        for (const auto& r : counts[w]) s += r[col];
        return s;
    }
    double crm_margin_pct(CrmClass c) const { return percent(crm_margin(static_cast<std::size_t>(row_of(c)))); }
    double ccd_margin_pct(std::size_t w, CcdClass c) const { return percent(ccd_margin(w, static_cast<std::size_t>(col_of(c)))); }

    static int row_of(CrmClass c) {
        for (std::size_t i = 0; i < kCrmRows.size(); ++i)
            if (kCrmRows[i] == c) return static_cast<int>(i);
        return -1;
    }
    static int col_of(CcdClass c) {
        for (std::size_t i = 0; i < kCcdCols.size(); ++i)
            if (kCcdCols[i] == c) return static_cast<int>(i);
        return -1;
    }
};

/// Classifies every scenario for CRM (power model with `skeleton`) and for the
/// interval design at each half-width in `widths` (symmetric intervals).
inline Table1 table1_crosstab(std::span<const ToxScenario> ensemble, std::span<const double> widths,
                              std::span<const double> skeleton, double p, unsigned workers = 1) {
    DOSEFIND_REQUIRE(!ensemble.empty(), ErrorCode::InvalidInput, "table1: empty ensemble");
    DOSEFIND_REQUIRE(!widths.empty(), ErrorCode::InvalidInput, "table1: no interval widths");
    Table1 t;
    t.m = ensemble.front().m();
    t.p = p;
    t.widths.assign(widths.begin(), widths.end());
    t.skeleton.assign(skeleton.begin(), skeleton.end());
    t.rows.resize(ensemble.size());
    parallel_for(ensemble.size(), workers, [&](std::size_t i) {
        ToxScenario s = ensemble[i];
        s.p = p;
        validate(s);
        ScenarioVerdicts& v = t.rows[i];
        v.mtd = mtd_index(s);
        v.crm = crm_classify(crm_nominations(s, skeleton), v.mtd).cls;
        for (double w : widths) v.ccd.push_back(ccd_classify(s, w, w).cls);
        v.misspecification = misspec_distance(s, skeleton, v.mtd);
    });
    t.counts.assign(widths.size(), {});
    for (const auto& v : t.rows)
        for (std::size_t w = 0; w < widths.size(); ++w)
            ++t.counts[w][static_cast<std::size_t>(Table1::row_of(v.crm))][static_cast<std::size_t>(Table1::col_of(v.ccd[w]))];
    return t;
}

// ---------------------------------------------------------------------------
// Empirical convergence

struct ScenarioEmpirics {
    std::size_t scenario = 0;
    CcdVerdict verdict;
    std::size_t replications = 0;
    double settled_at_mtd = 0.0;        // fraction of replications
    double settled_in_interval = 0.0;   // settled at some level of the closed interval
    double matches_oscillation = 0.0;   // limit set equals the oscillation pair
    std::vector<double> mtd_errors;     // |F_hat(u*) - f(u*)| per replication (NaN if too few subjects)
    std::size_t skip_violations = 0;    // consecutive subjects more than one level apart
};

struct EmpiricsReport {
    std::vector<ScenarioEmpirics> scenarios;

    /// Mean of `field` over scenarios whose verdict is `cls`; NaN if none.
    template <class Field>
    double class_mean(CcdClass cls, Field field) const {
        double sum = 0.0;
        std::size_t k = 0;
        for (const auto& s : scenarios)
            if (s.verdict.cls == cls) {
                sum += field(s);
                ++k;
            }
        return k == 0 ? std::nan("") : sum / static_cast<double>(k);
    }
    std::size_t class_count(CcdClass cls) const {
        std::size_t k = 0;
        for (const auto& s : scenarios) k += s.verdict.cls == cls;
        return k;
    }
};

struct EmpiricsConfig {
    std::size_t n = 20'000;
    std::size_t replications = 50;
    std::uint64_t seed = 1;
    double tail_fraction = 0.1;
    std::int64_t lemma_min_subjects = 50;
    unsigned workers = 1;
};

/// Runs `replications` interval-design trials per scenario and summarizes how
/// often the tail of each trace behaves as the classifier predicts.
inline EmpiricsReport convergence_empirics(std::span<const ToxScenario> ensemble, const DesignSpec& spec, const EmpiricsConfig& cfg) {
    DOSEFIND_REQUIRE(spec.kind == DesignKind::Interval, ErrorCode::InvalidInput, "convergence_empirics: interval design expected");
    DOSEFIND_REQUIRE(cfg.replications >= 1, ErrorCode::InvalidInput, "convergence_empirics: need at least one replication");
    const std::size_t reps = cfg.replications;
    EmpiricsReport rep;
    rep.scenarios.resize(ensemble.size());
    std::vector<CcdVerdict> verdicts(ensemble.size());
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        ToxScenario s = ensemble[i];
        s.p = spec.p;
        verdicts[i] = ccd_classify(s, spec.dp1, spec.dp2);
    }

    struct Cell {
        bool at_mtd = false;
        bool in_interval = false;
        bool oscillation = false;
        double mtd_error = 0.0;
        std::size_t skips = 0;
    };
    std::vector<Cell> cells(ensemble.size() * reps);
    parallel_for(cells.size(), cfg.workers, [&](std::size_t job) {
        const std::size_t i = job / reps;
        const std::size_t r = job % reps;
        const CcdVerdict& v = verdicts[i];
        const auto trace = run_trial(ensemble[i], spec, cfg.n, derive_seed(cfg.seed, StreamTag::Replication, {i, r}));
        const auto ls = estimate_limit_set(trace, cfg.tail_fraction);
        Cell& c = cells[job];
        c.at_mtd = ls.settled && ls.s1 == v.mtd;
        c.in_interval = ls.settled && std::find(v.levels_in_interval.begin(), v.levels_in_interval.end(), ls.s1) != v.levels_in_interval.end();
        c.oscillation = v.oscillation_pair && ls.s1 == v.oscillation_pair->first && ls.s2 == v.oscillation_pair->second;
        const auto& st = trace.final_state;
        c.mtd_error = st.n_at(v.mtd) >= cfg.lemma_min_subjects
                          ? std::fabs(static_cast<double>(st.tox_at(v.mtd)) / static_cast<double>(st.n_at(v.mtd)) - ensemble[i].at(v.mtd))
                          : std::nan("");
        for (std::size_t j = 1; j < trace.doses.size(); ++j) c.skips += std::abs(trace.doses[j] - trace.doses[j - 1]) > 1;
    });

    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        ScenarioEmpirics& e = rep.scenarios[i];
        e.scenario = i;
        e.verdict = verdicts[i];
        e.replications = reps;
        std::size_t at = 0, in = 0, osc = 0;
        for (std::size_t r = 0; r < reps; ++r) {
            const Cell& c = cells[i * reps + r];
            at += c.at_mtd;
            in += c.in_interval;
            osc += c.oscillation;
            e.mtd_errors.push_back(c.mtd_error);
            e.skip_violations += c.skips;
        }
        const double denom = static_cast<double>(reps);
        e.settled_at_mtd = static_cast<double>(at) / denom;
        e.settled_in_interval = static_cast<double>(in) / denom;
        e.matches_oscillation = static_cast<double>(osc) / denom;
    }
    return rep;
}

}  // namespace dosefind

#pragma once

// Domain types shared by every design: the true dose-toxicity curve, the
// running trial state, and frequency estimates of toxicity per dose level.
//
// Dose levels are 1-based throughout the public interface (d_1 .. d_m).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dosefind/error.hpp"
#include "dosefind/isotonic.hpp"
#include "dosefind/rational.hpp"

namespace dosefind {

/// True toxicity probabilities at m ordered dose levels plus the target rate.
struct ToxScenario {
    std::vector<double> f;
    double p = 0.3;
    std::string label;

    int m() const { return static_cast<int>(f.size()); }
    double at(int level) const { return f[static_cast<std::size_t>(level - 1)]; }
};

/// Checks the scenario invariants: m >= 2, every f in (0,1), strictly
/// increasing, p in (0,1). Messages name the offending levels.
inline void validate(const ToxScenario& s) {
    DOSEFIND_REQUIRE(s.m() >= 2, ErrorCode::InvalidInput, "f: need at least 2 dose levels, got " + std::to_string(s.m()));
    DOSEFIND_REQUIRE(s.p > 0.0 && s.p < 1.0, ErrorCode::InvalidInput, "p: target must lie in (0,1)");
    for (int u = 1; u <= s.m(); ++u) {
        const double x = s.at(u);
        DOSEFIND_REQUIRE(std::isfinite(x) && x > 0.0 && x < 1.0, ErrorCode::InvalidInput,
                         "f: level " + std::to_string(u) + " value " + std::to_string(x) + " is not in (0,1)");
        if (u > 1) {
            DOSEFIND_REQUIRE(s.at(u - 1) < x, ErrorCode::InvalidInput,
                             "f: not strictly increasing at levels " + std::to_string(u - 1) + "," + std::to_string(u));
        }
    }
}

inline ToxScenario make_scenario(std::vector<double> f, double p, std::string label = {}) {
    ToxScenario s{std::move(f), p, std::move(label)};
    validate(s);
    return s;
}

/// Weaker check used by the simulator, which also accepts deterministic
/// surrogate curves such as (0, 0, 1).
inline void validate_probabilities(const ToxScenario& s) {
    DOSEFIND_REQUIRE(s.m() >= 1, ErrorCode::InvalidInput, "f: empty curve");
    for (int u = 1; u <= s.m(); ++u) {
        DOSEFIND_REQUIRE(s.at(u) >= 0.0 && s.at(u) <= 1.0, ErrorCode::InvalidInput,
                         "f: level " + std::to_string(u) + " is not a probability");
    }
}

struct Observation {
    int level = 1;
    bool toxic = false;

    friend bool operator==(const Observation&, const Observation&) = default;
};

/// Allocation and outcome history of one trial. `current` is the dose most
/// recently allocated (the start dose before any subject is treated).
class TrialState {
public:
    TrialState() = default;
    TrialState(int m, int start) : m_(m), current_(start), n_(static_cast<std::size_t>(m), 0), tox_(static_cast<std::size_t>(m), 0) {
        DOSEFIND_REQUIRE(m >= 1, ErrorCode::InvalidInput, "trial state needs at least one level");
        check_level(start, "start");
    }

    /// Rebuilds a state by folding a history.
    static TrialState replay(int m, int current, std::span<const Observation> history) {
        TrialState s(m, current);
        s.history_.reserve(history.size());
        for (const auto& o : history) s.record(o.level, o.toxic);
        s.current_ = current;
        return s;
    }

    int m() const { return m_; }
    int current() const { return current_; }
    const std::vector<std::int64_t>& n() const { return n_; }
    const std::vector<std::int64_t>& tox() const { return tox_; }
    const std::vector<Observation>& history() const { return history_; }
    std::int64_t n_at(int level) const { return n_[idx(level)]; }
    std::int64_t tox_at(int level) const { return tox_[idx(level)]; }
    std::size_t size() const { return history_.size(); }
    bool empty() const { return history_.empty(); }

    void record(int level, bool toxic) {
        check_level(level, "dose");
        ++n_[idx(level)];
        if (toxic) ++tox_[idx(level)];
        history_.push_back({level, toxic});
        current_ = level;
    }

    void move_to(int level) {
        check_level(level, "next dose");
        current_ = level;
    }

    void reserve(std::size_t subjects) { history_.reserve(subjects); }

private:
    static std::size_t idx(int level) { return static_cast<std::size_t>(level - 1); }
    void check_level(int level, const char* what) const {
        DOSEFIND_REQUIRE(level >= 1 && level <= m_, ErrorCode::InvalidInput,
                         std::string(what) + ": level " + std::to_string(level) + " outside 1.." + std::to_string(m_));
    }

    int m_ = 0;
    int current_ = 1;
    std::vector<std::int64_t> n_;
    std::vector<std::int64_t> tox_;
    std::vector<Observation> history_;
};

/// Per-level toxicity estimates; std::nullopt marks an unvisited level.
struct EstimateVector {
    std::vector<std::optional<Rational>> value;
    std::vector<std::int64_t> weight;

    int m() const { return static_cast<int>(value.size()); }
    const std::optional<Rational>& at(int level) const { return value[static_cast<std::size_t>(level - 1)]; }
    bool any_defined() const {
        for (const auto& v : value)
            if (v) return true;
        return false;
    }
};

/// Raw binomial frequency estimates tox[u]/n[u].
inline EstimateVector fhat(const TrialState& state) {
    EstimateVector est;
    est.value.resize(static_cast<std::size_t>(state.m()));
    est.weight = state.n();
    for (std::size_t u = 0; u < est.value.size(); ++u) {
        if (state.n()[u] > 0) est.value[u] = Rational(state.tox()[u], state.n()[u]);
    }
    return est;
}

/// Weighted isotonic regression of the defined entries (weights = subject
/// counts). Unvisited levels stay undefined and do not break adjacency.
inline EstimateVector monotonize(const EstimateVector& est) {
    DOSEFIND_REQUIRE(est.value.size() == est.weight.size(), ErrorCode::InvalidInput, "estimate/weight size mismatch");
    DOSEFIND_REQUIRE(est.any_defined(), ErrorCode::NoData, "no data to monotonize");

    struct Pool {
        Rational weighted_sum;  // sum of weight * value
        std::int64_t weight = 0;
        Pool& operator+=(const Pool& o) {
            weighted_sum = weighted_sum + o.weighted_sum;
            weight += o.weight;
            return *this;
        }
    };
    std::vector<Pool> pools;
    std::vector<std::size_t> where;
    for (std::size_t u = 0; u < est.value.size(); ++u) {
        if (!est.value[u]) continue;
        DOSEFIND_REQUIRE(est.weight[u] > 0, ErrorCode::InvalidInput,
                         "defined estimate at level " + std::to_string(u + 1) + " has non-positive weight");
        pools.push_back({*est.value[u] * Rational(est.weight[u]), est.weight[u]});
        where.push_back(u);
    }
    const auto runs = pool_adjacent_violators<Pool>(pools, [](const Pool& a, const Pool& b) {
        return a.weighted_sum * Rational(b.weight) > b.weighted_sum * Rational(a.weight);
    });

    EstimateVector out = est;
    std::size_t k = 0;
    for (const auto& r : runs) {
        const Rational mean = r.block.weighted_sum * Rational(1, r.block.weight);
        for (std::size_t i = 0; i < r.size; ++i) out.value[where[k++]] = mean;
    }
    return out;
}

/// Index of the element of `values` closest to `target`; ties (within 1e-12)
/// go to the lower index. Returns a 1-based level.
inline int nearest_level(std::span<const double> values, double target) {
    DOSEFIND_REQUIRE(!values.empty(), ErrorCode::InvalidInput, "nearest_level: empty curve");
    constexpr double kTie = 1e-12;
    std::size_t best = 0;
    double best_dist = std::fabs(values[0] - target);
    for (std::size_t u = 1; u < values.size(); ++u) {
        const double d = std::fabs(values[u] - target);
        if (d < best_dist - kTie) {
            best = u;
            best_dist = d;
        }
    }
    return static_cast<int>(best) + 1;
}

/// MTD: argmin_u |f[u] - p| on the response scale, ties to the lower dose.
/// Compared exactly on the decimal-snapped values.
inline int mtd_index(const ToxScenario& s) {
    DOSEFIND_REQUIRE(s.m() >= 1, ErrorCode::InvalidInput, "mtd_index: empty curve");
    const Rational p = Rational::from_decimal(s.p);
    int best = 1;
    Rational best_dist = abs(Rational::from_decimal(s.at(1)) - p);
    for (int u = 2; u <= s.m(); ++u) {
        const Rational d = abs(Rational::from_decimal(s.at(u)) - p);
        if (d < best_dist) {
            best = u;
            best_dist = d;
        }
    }
    return best;
}

}  // namespace dosefind

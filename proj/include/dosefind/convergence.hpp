#pragma once

// Deterministic asymptotic classifiers, read off the true curve alone.
//
// Interval designs: a unique level inside the closed interval that is also
// strictly inside the open interval attracts the allocation; no level inside
// leads to oscillation between the straddling pair; several levels inside
// guarantee settling somewhere in the interval only.
//
// CRM: each level u "nominates" the level the model picks once its single
// parameter is pinned so that the model matches the truth at u.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dosefind/designs.hpp"
#include "dosefind/error.hpp"
#include "dosefind/model.hpp"
#include "dosefind/rational.hpp"

namespace dosefind {

enum class CcdClass : std::uint8_t { No0, No2plus, Yes };
enum class CrmClass : std::uint8_t { No0, No2plus, Funneling, Yes, NoFunneling };

inline const char* to_string(CcdClass c) {
    switch (c) {
        case CcdClass::No0: return "No0";
        case CcdClass::No2plus: return "No2plus";
        case CcdClass::Yes: return "Yes";
    }
    return "?";
}

inline const char* to_string(CrmClass c) {
    switch (c) {
        case CrmClass::No0: return "No0";
        case CrmClass::No2plus: return "No2plus";
        case CrmClass::Funneling: return "Funneling";
        case CrmClass::Yes: return "Yes";
        case CrmClass::NoFunneling: return "NoFunneling";
    }
    return "?";
}

struct CcdVerdict {
    CcdClass cls = CcdClass::No0;
    int mtd = 1;
    std::vector<int> levels_in_interval;  // f[u] in the closed interval [p-dp1, p+dp2]
    std::optional<std::pair<int, int>> oscillation_pair;
    bool boundary_case = false;           // f[1] >= p+dp2 or f[m] <= p-dp1
    std::string note;                     // set for edge configurations the theorem does not cover
};

inline CcdVerdict ccd_classify(const ToxScenario& s, double dp1, double dp2) {
    DOSEFIND_REQUIRE(dp1 > 0.0 && dp2 > 0.0, ErrorCode::InvalidInput, "interval: dp1 and dp2 must be positive");
    const IntervalRule rule(s.p, dp1, dp2);
    const Rational& lo = rule.lower();
    const Rational& hi = rule.upper();
    DOSEFIND_REQUIRE(lo > Rational(0) && hi < Rational(1), ErrorCode::InvalidInput,
                     "interval: (p-dp1, p+dp2) must lie inside (0,1)");

    const int m = s.m();
    std::vector<Rational> f;
    f.reserve(static_cast<std::size_t>(m));
    for (int u = 1; u <= m; ++u) f.push_back(Rational::from_decimal(s.at(u)));
    auto at = [&](int u) -> const Rational& { return f[static_cast<std::size_t>(u - 1)]; };

    CcdVerdict v;
    v.mtd = mtd_index(s);
    int highest_below = 0;  // highest level with f <= lo
    int lowest_above = 0;   // lowest level with f >= hi
    for (int u = 1; u <= m; ++u) {
        if (at(u) >= lo && at(u) <= hi) v.levels_in_interval.push_back(u);
        if (at(u) <= lo) highest_below = u;
        if (at(u) >= hi && lowest_above == 0) lowest_above = u;
    }
    v.boundary_case = at(1) >= hi || at(m) <= lo;

    if (v.boundary_case) {
        v.cls = CcdClass::Yes;
        return v;
    }
    if (v.levels_in_interval.size() >= 2) {
        v.cls = CcdClass::No2plus;
        return v;
    }
    if (v.levels_in_interval.size() == 1) {
        const int only = v.levels_in_interval.front();
        const bool strictly_inside = at(only) > lo && at(only) < hi;
        if (strictly_inside && only == v.mtd) {
            v.cls = CcdClass::Yes;
            return v;
        }
        v.note = strictly_inside ? "single level inside the interval is not the MTD"
                                 : "single level sits exactly on an interval endpoint";
    }
    v.cls = CcdClass::No0;
    if (highest_below > 0 && lowest_above == highest_below + 1) v.oscillation_pair = std::make_pair(highest_below, lowest_above);
    return v;
}

struct NominationTable {
    std::vector<double> theta;  // theta[u-1] pins the model to f at level u
    std::vector<int> nominee;   // 1-based level nominated by each level

    int m() const { return static_cast<int>(theta.size()); }
    int nominee_of(int level) const { return nominee[static_cast<std::size_t>(level - 1)]; }
};

/// Closed form for the power model: exp(theta_u) = ln f[u] / ln skeleton[u].
inline NominationTable crm_nominations(const ToxScenario& s, std::span<const double> skeleton) {
    DOSEFIND_REQUIRE(static_cast<int>(skeleton.size()) == s.m(), ErrorCode::InvalidInput,
                     "skeleton: expected " + std::to_string(s.m()) + " entries, got " + std::to_string(skeleton.size()));
    NominationTable t;
    t.theta.reserve(skeleton.size());
    t.nominee.reserve(skeleton.size());
    for (int u = 1; u <= s.m(); ++u) {
        const double sk = skeleton[static_cast<std::size_t>(u - 1)];
        DOSEFIND_REQUIRE(sk > 0.0 && sk < 1.0, ErrorCode::InvalidInput, "skeleton: level " + std::to_string(u) + " is not in (0,1)");
        DOSEFIND_REQUIRE(s.at(u) > 0.0 && s.at(u) < 1.0, ErrorCode::InvalidInput, "f: level " + std::to_string(u) + " is not in (0,1)");
        const double theta = std::log(std::log(s.at(u)) / std::log(sk));
        t.theta.push_back(theta);
        t.nominee.push_back(crm_select_level(skeleton, theta, s.p));
    }
    return t;
}

/// Sub-MTD levels nominate higher, supra-MTD levels nominate lower, and the
/// MTD nominates itself.
inline bool funneling_holds(const NominationTable& t, int u_star) {
    if (t.nominee_of(u_star) != u_star) return false;
    for (int u = 1; u <= t.m(); ++u) {
        if (u < u_star && t.nominee_of(u) <= u) return false;
        if (u > u_star && t.nominee_of(u) >= u) return false;
    }
    return true;
}

struct CrmVerdict {
    CrmClass cls = CrmClass::NoFunneling;
    std::vector<int> self_nominators;
};

/// Precedence: Yes, No0, No2plus, Funneling, NoFunneling.
inline CrmVerdict crm_classify(const NominationTable& t, int u_star) {
    DOSEFIND_REQUIRE(u_star >= 1 && u_star <= t.m(), ErrorCode::InvalidInput, "u_star outside the level range");
    CrmVerdict v;
    bool all_nominate_mtd = true;
    bool other_self = false;
    for (int u = 1; u <= t.m(); ++u) {
        if (t.nominee_of(u) == u) {
            v.self_nominators.push_back(u);
            if (u != u_star) other_self = true;
        }
        if (t.nominee_of(u) != u_star) all_nominate_mtd = false;
    }
    if (all_nominate_mtd)
        v.cls = CrmClass::Yes;
    else if (t.nominee_of(u_star) != u_star)
        v.cls = CrmClass::No0;
    else if (other_self)
        v.cls = CrmClass::No2plus;
    else if (funneling_holds(t, u_star))
        v.cls = CrmClass::Funneling;
    else
        v.cls = CrmClass::NoFunneling;
    return v;
}

/// Sup-distance over the levels between the truth and the model pinned to the
/// truth at u_star.
inline double misspec_distance(const ToxScenario& s, std::span<const double> skeleton, int u_star) {
    const NominationTable t = crm_nominations(s, skeleton);
    const auto g = crm_curve(skeleton, t.theta[static_cast<std::size_t>(u_star - 1)]);
    double worst = 0.0;
    for (int u = 1; u <= s.m(); ++u) worst = std::max(worst, std::fabs(s.at(u) - g[static_cast<std::size_t>(u - 1)]));
    return worst;
}

}  // namespace dosefind

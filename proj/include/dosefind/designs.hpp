#pragma once

// Sequential dose-allocation rules: interval (cumulative cohort), point
// (nearest monotonized estimate) and the one-parameter power-model CRM fitted
// by bounded maximum likelihood.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "dosefind/error.hpp"
#include "dosefind/model.hpp"
#include "dosefind/rational.hpp"

namespace dosefind {

enum class DesignKind : std::uint8_t { Interval, Point, Crm };

inline const char* to_string(DesignKind k) {
    switch (k) {
        case DesignKind::Interval: return "interval";
        case DesignKind::Point: return "point";
        case DesignKind::Crm: return "crm";
    }
    return "?";
}

inline DesignKind parse_design_kind(const std::string& s) {
    if (s == "interval") return DesignKind::Interval;
    if (s == "point") return DesignKind::Point;
    if (s == "crm") return DesignKind::Crm;
    throw Error(ErrorCode::InvalidInput, "design: unknown kind '" + s + "' (expected interval, point or crm)");
}

struct DesignSpec {
    DesignKind kind = DesignKind::Interval;
    double p = 0.3;
    int cohort = 1;
    int start = 1;

    // interval
    double dp1 = 0.1;
    double dp2 = 0.1;
    bool interval_monotonized = false;  // consult the monotonized estimate at the current dose

    // crm
    std::vector<double> skeleton;
    double theta_lo = -10.0;
    double theta_hi = 10.0;
    bool no_skip = false;
};

/// Checks the parameters that apply to the spec's kind against m levels.
inline void validate(const DesignSpec& d, int m) {
    DOSEFIND_REQUIRE(m >= 1, ErrorCode::InvalidInput, "design: need at least one level");
    DOSEFIND_REQUIRE(d.p > 0.0 && d.p < 1.0, ErrorCode::InvalidInput, "p: target must lie in (0,1)");
    DOSEFIND_REQUIRE(d.cohort >= 1, ErrorCode::InvalidInput, "cohort: size must be >= 1");
    DOSEFIND_REQUIRE(d.start >= 1 && d.start <= m, ErrorCode::InvalidInput,
                     "start: level " + std::to_string(d.start) + " outside 1.." + std::to_string(m));
    switch (d.kind) {
        case DesignKind::Interval:
            DOSEFIND_REQUIRE(d.dp1 > 0.0 && d.dp2 > 0.0, ErrorCode::InvalidInput, "dp1/dp2: must be positive");
            DOSEFIND_REQUIRE(Rational::from_decimal(d.p) - Rational::from_decimal(d.dp1) > Rational(0) &&
                                 Rational::from_decimal(d.p) + Rational::from_decimal(d.dp2) < Rational(1),
                             ErrorCode::InvalidInput, "dp1/dp2: interval (p-dp1, p+dp2) must lie inside (0,1)");
            break;
        case DesignKind::Point: break;
        case DesignKind::Crm:
            DOSEFIND_REQUIRE(static_cast<int>(d.skeleton.size()) == m, ErrorCode::InvalidInput,
                             "skeleton: expected " + std::to_string(m) + " entries, got " + std::to_string(d.skeleton.size()));
            for (std::size_t u = 0; u < d.skeleton.size(); ++u) {
                DOSEFIND_REQUIRE(d.skeleton[u] > 0.0 && d.skeleton[u] < 1.0, ErrorCode::InvalidInput,
                                 "skeleton: level " + std::to_string(u + 1) + " is not in (0,1)");
                DOSEFIND_REQUIRE(u == 0 || d.skeleton[u - 1] < d.skeleton[u], ErrorCode::InvalidInput,
                                 "skeleton: not strictly increasing at levels " + std::to_string(u) + "," + std::to_string(u + 1));
            }
            DOSEFIND_REQUIRE(d.theta_lo < 0.0 && 0.0 < d.theta_hi, ErrorCode::InvalidInput, "theta bounds: need lo < 0 < hi");
            break;
    }
}

/// A dose decision and a human-readable account of the rule branch that fired.
struct Decision {
    int next = 1;
    std::string reason;
};

namespace detail {

inline std::string fmt_rational(const Rational& r) {
    std::ostringstream os;
    os.precision(6);
    os << r.to_double();
    return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Interval design

/// Interval bounds converted once to exact rationals; the simulator keeps one
/// of these per trial so the per-subject step is a pair of integer compares.
class IntervalRule {
public:
    IntervalRule(double p, double dp1, double dp2, bool monotonized = false)
        : lower_(Rational::from_decimal(p) - Rational::from_decimal(dp1)),
          upper_(Rational::from_decimal(p) + Rational::from_decimal(dp2)),
          monotonized_(monotonized) {}

    explicit IntervalRule(const DesignSpec& d) : IntervalRule(d.p, d.dp1, d.dp2, d.interval_monotonized) {}

    const Rational& lower() const { return lower_; }
    const Rational& upper() const { return upper_; }

    Decision decide(const TrialState& state) const {
        const int u = state.current();
        if (state.n_at(u) == 0) return {u, "no data at current dose: repeat"};
        const Rational q = monotonized_ ? *monotonize(fhat(state)).at(u) : Rational(state.tox_at(u), state.n_at(u));
        return decide(u, state.m(), q);
    }

    /// The rule reads only the current level, the estimate there and the bounds.
    Decision decide(int current, int m, const Rational& q) const {
        const std::string est = "estimate " + detail::fmt_rational(q);
        if (q <= lower_) {
            if (current == m) return {m, est + " <= p-dp1 = " + detail::fmt_rational(lower_) + " at top dose: repeat"};
            return {current + 1, est + " <= p-dp1 = " + detail::fmt_rational(lower_) + ": escalate"};
        }
        if (q >= upper_) {
            if (current == 1) return {1, est + " >= p+dp2 = " + detail::fmt_rational(upper_) + " at lowest dose: repeat"};
            return {current - 1, est + " >= p+dp2 = " + detail::fmt_rational(upper_) + ": de-escalate"};
        }
        return {current, est + " inside (p-dp1, p+dp2): repeat"};
    }

    /// Fast path for the simulator: same branches without the reason text.
    int next(int current, int m, std::int64_t tox, std::int64_t n) const {
        if (n == 0) return current;
        if (int128{tox} * lower_.den() <= int128{lower_.num()} * n) return std::min(current + 1, m);
        if (int128{tox} * upper_.den() >= int128{upper_.num()} * n) return std::max(current - 1, 1);
        return current;
    }

private:
    Rational lower_;
    Rational upper_;
    bool monotonized_;
};

inline Decision interval_decide(const TrialState& state, const DesignSpec& spec) { return IntervalRule(spec).decide(state); }
inline int interval_next_dose(const TrialState& state, const DesignSpec& spec) { return interval_decide(state, spec).next; }

// ---------------------------------------------------------------------------
// Point design

namespace detail {

/// The point-design rule on raw counts without allocating: pool adjacent
/// violators over (tox, n) blocks and compare means by cross-multiplication.
/// Returns 0 when m exceeds the fixed block capacity.
inline int point_next_counts(const TrialState& state, double p) {
    using wide = int128;
    constexpr int kCap = 64;
    const int m = state.m();
    if (m > kCap) return 0;
    struct Block {
        std::int64_t tox, n;
        int first;
    };
    Block blocks[kCap];
    int k = 0;
    for (int u = 1; u <= m; ++u) {
        const std::int64_t n = state.n_at(u);
        if (n == 0) continue;
        blocks[k++] = {state.tox_at(u), n, u};
        // merge while the previous block's mean exceeds the last one's
        while (k > 1 && wide{blocks[k - 2].tox} * blocks[k - 1].n > wide{blocks[k - 1].tox} * blocks[k - 2].n) {
            blocks[k - 2].tox += blocks[k - 1].tox;
            blocks[k - 2].n += blocks[k - 1].n;
            --k;
        }
    }
    const wide pn = std::llround(p * static_cast<double>(Rational::kDecimalScale));
    const wide pd = Rational::kDecimalScale;
    // sign and size of (tox/n - p) scaled by n*pd
    auto gap = [&](const Block& b) { return wide{b.tox} * pd - pn * b.n; };
    int highest = 0;
    for (int u = m; u >= 1 && highest == 0; --u)
        if (state.n_at(u) > 0) highest = u;
    if (gap(blocks[k - 1]) < 0) return std::min(highest + 1, m);
    if (gap(blocks[0]) > 0) return std::max(blocks[0].first - 1, 1);
    int best = 0;
    wide best_num = 0, best_den = 1;
    for (int i = 0; i < k; ++i) {
        const wide g = gap(blocks[i]);
        const wide num = g < 0 ? -g : g;
        const wide den = blocks[i].n;
        if (best == 0 || num * best_den < best_num * den) {
            best = blocks[i].first;
            best_num = num;
            best_den = den;
        }
    }
    return best;
}

}  // namespace detail

inline Decision point_decide(const TrialState& state, const DesignSpec& spec, bool explain = true) {
    DOSEFIND_REQUIRE(!state.empty(), ErrorCode::NoData, "point design requires at least one observation");
    if (!explain)
        if (const int next = detail::point_next_counts(state, spec.p)) return {next, {}};
    const EstimateVector est = monotonize(fhat(state));
    const Rational p = Rational::from_decimal(spec.p);
    const int m = state.m();

    int lowest = 0;
    int highest = 0;
    int best = 0;
    Rational best_dist;
    for (int u = 1; u <= m; ++u) {
        const auto& e = est.at(u);
        if (!e) continue;
        if (lowest == 0) lowest = u;
        highest = u;
        const Rational d = abs(*e - p);
        if (best == 0 || d < best_dist) {
            best = u;
            best_dist = d;
        }
    }
    if (*est.at(highest) < p) {
        if (!explain) return {std::min(highest + 1, m), {}};
        const std::string why = "highest tried dose " + std::to_string(highest) + " estimate " +
                                detail::fmt_rational(*est.at(highest)) + " < p";
        if (highest == m) return {m, why + " at top dose: repeat"};
        return {highest + 1, why + ": escalate"};
    }
    if (*est.at(lowest) > p) {
        if (!explain) return {std::max(lowest - 1, 1), {}};
        const std::string why = "lowest tried dose " + std::to_string(lowest) + " estimate " +
                                detail::fmt_rational(*est.at(lowest)) + " > p";
        if (lowest == 1) return {1, why + " at lowest dose: repeat"};
        return {lowest - 1, why + ": de-escalate"};
    }
    if (!explain) return {best, {}};
    return {best, "monotonized estimate " + detail::fmt_rational(*est.at(best)) + " at dose " + std::to_string(best) +
                      " is closest to p"};
}

inline int point_next_dose(const TrialState& state, const DesignSpec& spec) { return point_decide(state, spec, false).next; }

// ---------------------------------------------------------------------------
// CRM, power model G(d_u) = skeleton[u]^exp(theta)

/// Model toxicity at every level for a given theta.
inline std::vector<double> crm_curve(std::span<const double> skeleton, double theta) {
    std::vector<double> g(skeleton.size());
    const double a = std::exp(theta);
    for (std::size_t u = 0; u < skeleton.size(); ++u) g[u] = std::exp(a * std::log(skeleton[u]));
    return g;
}

/// Level whose modeled toxicity is closest to p (ties to the lower level).
/// The modeled curve is increasing, so only the levels straddling p compete;
/// they are located on the log scale, which stays exact when extreme theta
/// underflows every G to zero.
inline int crm_select_level(std::span<const double> skeleton, double theta, double p) {
    DOSEFIND_REQUIRE(!skeleton.empty(), ErrorCode::InvalidInput, "skeleton: empty");
    const double a = std::exp(theta);
    const double log_p = std::log(p);
    std::size_t below = skeleton.size();  // last level with G <= p
    for (std::size_t u = 0; u < skeleton.size(); ++u)
        if (a * std::log(skeleton[u]) <= log_p) below = u;
    if (below == skeleton.size()) return 1;
    if (below + 1 == skeleton.size()) return static_cast<int>(below) + 1;
    const double g_below = std::exp(a * std::log(skeleton[below]));
    const double g_above = std::exp(a * std::log(skeleton[below + 1]));
    constexpr double kTie = 1e-12;
    return (g_above - p) < (p - g_below) - kTie ? static_cast<int>(below) + 2 : static_cast<int>(below) + 1;
}

/// Bernoulli log-likelihood of the pooled counts under the power model.
inline double crm_log_likelihood(std::span<const double> skeleton, std::span<const std::int64_t> n,
                                 std::span<const std::int64_t> tox, double theta) {
    const double a = std::exp(theta);
    double ll = 0.0;
    for (std::size_t u = 0; u < skeleton.size(); ++u) {
        if (n[u] == 0) continue;
        const double log_g = a * std::log(skeleton[u]);  // log G, never -inf
        const double log_1mg = std::log(-std::expm1(log_g));
        ll += static_cast<double>(tox[u]) * log_g + static_cast<double>(n[u] - tox[u]) * log_1mg;
    }
    return ll;
}

/// Bounded MLE of theta by golden-section search. The likelihood is concave
/// in exp(theta), hence unimodal in theta. All-toxic data returns theta_lo,
/// all-non-toxic data returns theta_hi.
inline double crm_fit_theta(const TrialState& state, const DesignSpec& spec) {
    DOSEFIND_REQUIRE(!state.empty(), ErrorCode::NoData, "crm fit requires at least one observation");
    DOSEFIND_REQUIRE(static_cast<int>(spec.skeleton.size()) == state.m(), ErrorCode::InvalidInput,
                     "skeleton: length does not match the number of levels");
    std::int64_t total_tox = 0;
    for (auto t : state.tox()) total_tox += t;
    if (total_tox == static_cast<std::int64_t>(state.size())) return spec.theta_lo;
    if (total_tox == 0) return spec.theta_hi;

    auto ll = [&](double th) { return crm_log_likelihood(spec.skeleton, state.n(), state.tox(), th); };
    constexpr double kInvPhi = 0.6180339887498949;
    constexpr double kTol = 1e-8;
    double a = spec.theta_lo;
    double b = spec.theta_hi;
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double fc = ll(c);
    double fd = ll(d);
    while (b - a > kTol) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = ll(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = ll(d);
        }
    }
    double best = 0.5 * (a + b);
    double best_ll = ll(best);
    // Newton polish on the score in exp(theta), where the likelihood is
    // concave, to bring the estimate to machine precision.
    double scale = std::exp(best);
    for (int it = 0; it < 8; ++it) {
        double score = 0.0;
        double curvature = 0.0;
        for (std::size_t u = 0; u < spec.skeleton.size(); ++u) {
            const std::int64_t nu = state.n()[u];
            if (nu == 0) continue;
            const double ls = std::log(spec.skeleton[u]);
            const double g = std::exp(scale * ls);
            const double safe = static_cast<double>(nu - state.tox()[u]);
            score += static_cast<double>(state.tox()[u]) * ls - safe * ls * g / (1.0 - g);
            curvature -= safe * ls * ls * g / ((1.0 - g) * (1.0 - g));
        }
        if (!(curvature < 0.0) || !std::isfinite(score)) break;
        const double next_scale = scale - score / curvature;
        if (!(next_scale > 0.0)) break;
        const double next_theta = std::log(next_scale);
        if (next_theta < spec.theta_lo || next_theta > spec.theta_hi) break;
        const double next_ll = ll(next_theta);
        if (next_ll < best_ll - 1e-9 * (1.0 + std::fabs(best_ll))) break;
        const bool done = std::fabs(next_theta - best) < 1e-15;
        best = next_theta;
        best_ll = next_ll;
        scale = next_scale;
        if (done) break;
    }
    // The maximum may sit on a bound when the interior optimum lies outside.
    for (double edge : {spec.theta_lo, spec.theta_hi}) {
        const double e = ll(edge);
        if (e > best_ll) {
            best = edge;
            best_ll = e;
        }
    }
    return best;
}

inline Decision crm_decide(const TrialState& state, const DesignSpec& spec, bool explain = true) {
    const double theta = crm_fit_theta(state, spec);
    const int target = crm_select_level(spec.skeleton, theta, spec.p);
    if (!explain) {
        if (spec.no_skip) return {std::clamp(target, state.current() - 1, state.current() + 1), {}};
        return {target, {}};
    }
    std::ostringstream why;
    why.precision(6);
    why << "fitted theta " << theta << " puts dose " << target << " closest to p";
    if (spec.no_skip) {
        const int cur = state.current();
        const int clamped = std::clamp(target, cur - 1, cur + 1);
        if (clamped != target) {
            why << "; no-skipping limits the move to dose " << clamped;
            return {clamped, why.str()};
        }
    }
    return {target, why.str()};
}

inline int crm_next_dose(const TrialState& state, const DesignSpec& spec) { return crm_decide(state, spec, false).next; }

// ---------------------------------------------------------------------------

/// Dispatches on the design kind. Before any observation every design keeps
/// the start (current) dose.
inline Decision decide(const TrialState& state, const DesignSpec& spec, bool explain = true) {
    if (state.empty()) return {state.current(), explain ? "no observations yet: start dose" : ""};
    switch (spec.kind) {
        case DesignKind::Interval:
            if (!explain && !spec.interval_monotonized) {
                const int u = state.current();
                return {IntervalRule(spec).next(u, state.m(), state.tox_at(u), state.n_at(u)), {}};
            }
            return interval_decide(state, spec);
        case DesignKind::Point: return point_decide(state, spec, explain);
        case DesignKind::Crm: return crm_decide(state, spec, explain);
    }
    throw Error(ErrorCode::InvalidInput, "design: unknown kind");
}

inline int next_dose(const TrialState& state, const DesignSpec& spec) { return decide(state, spec, false).next; }

/// Recommended MTD: the dose the design would allocate to one more cohort.
inline int recommend_mtd(const TrialState& state, const DesignSpec& spec) { return next_dose(state, spec); }

}  // namespace dosefind

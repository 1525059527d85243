#pragma once

// The `dosefind` command line.
//
// Output convention: --out FILE always receives the machine-readable records
// (one JSON object per line). Standard output gets the human-readable report
// with --format text (the default) and the records with --format records
// when no --out is given. Exit codes: 0 success, 1 invalid input or I/O
// failure, 2 usage error.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dosefind/app/http.hpp"
#include "dosefind/app/records.hpp"
#include "dosefind/app/session.hpp"
#include "dosefind/convergence.hpp"
#include "dosefind/designs.hpp"
#include "dosefind/scenario_gen.hpp"
#include "dosefind/simulator.hpp"

namespace dosefind::app {

namespace cli {

struct Common {
    std::uint64_t seed = 1;
    std::string out;
    std::string format = "text";
    unsigned workers = 0;
};

struct DesignFlags {
    std::string design = "interval";
    std::optional<double> p;
    double dp1 = 0.1;
    double dp2 = 0.1;
    std::vector<double> skeleton;
    int cohort = 1;
    int start = 1;
    bool monotonized = false;
    bool no_skip = false;
};

struct ScenarioFlags {
    std::vector<double> f;
    std::string scenarios;  // JSONL file
};

inline void add_common(CLI::App* app, Common& c) {
    app->add_option("--seed", c.seed, "Master seed")->capture_default_str();
    app->add_option("--out", c.out, "Write machine-readable records to this file");
    app->add_option("--format", c.format, "Standard output format")->check(CLI::IsMember({"text", "records"}))->capture_default_str();
    app->add_option("--workers", c.workers, "Worker threads (0 = all cores); results do not depend on it")->capture_default_str();
}

inline void add_design(CLI::App* app, DesignFlags& d, bool p_required) {
    app->add_option("--design", d.design, "interval, point or crm")
        ->check(CLI::IsMember({"interval", "point", "crm"}))
        ->capture_default_str();
    auto* p = app->add_option("--p", d.p, "Target toxicity rate");
    if (p_required) p->required();
    app->add_option("--dp1", d.dp1, "Interval half-width below p")->capture_default_str();
    app->add_option("--dp2", d.dp2, "Interval half-width above p")->capture_default_str();
    app->add_option("--skeleton", d.skeleton, "CRM skeleton, comma separated (default for m = 5 or 10)")->delimiter(',');
    app->add_option("--cohort", d.cohort, "Cohort size")->capture_default_str();
    app->add_option("--start", d.start, "Start dose level")->capture_default_str();
    app->add_flag("--monotonized", d.monotonized, "Interval design reads the monotonized estimate");
    app->add_flag("--no-skip", d.no_skip, "CRM may move at most one level per cohort");
}

inline void add_scenarios(CLI::App* app, ScenarioFlags& s) {
    app->add_option("--f", s.f, "True toxicity curve, comma separated")->delimiter(',');
    app->add_option("--scenarios", s.scenarios, "JSONL file with one scenario (field f) per line");
}

inline std::vector<double> skeleton_for(const DesignFlags& d, int m) {
    if (!d.skeleton.empty()) return d.skeleton;
    return default_skeleton(m);
}

inline DesignSpec build_design(const DesignFlags& d, int m) {
    DesignSpec s;
    s.kind = parse_design_kind(d.design);
    s.p = d.p.value_or(0.3);
    s.dp1 = d.dp1;
    s.dp2 = d.dp2;
    s.cohort = d.cohort;
    s.start = d.start;
    s.interval_monotonized = d.monotonized;
    s.no_skip = d.no_skip;
    if (s.kind == DesignKind::Crm) s.skeleton = skeleton_for(d, m);
    validate(s, m);
    return s;
}

inline std::vector<ToxScenario> load_scenarios(const ScenarioFlags& s, std::optional<double> p, bool allow_degenerate = false) {
    DOSEFIND_REQUIRE(s.f.empty() != s.scenarios.empty(), ErrorCode::InvalidInput, "f: pass exactly one of --f or --scenarios");
    if (!s.f.empty()) {
        ToxScenario sc{s.f, p.value_or(0.3), "cli"};
        if (allow_degenerate) validate_probabilities(sc);
        else validate(sc);
        return {sc};
    }
    std::ifstream in(s.scenarios);
    DOSEFIND_REQUIRE(in.good(), ErrorCode::Io, "scenarios: cannot read " + s.scenarios);
    auto out = read_scenarios(in, p);
    DOSEFIND_REQUIRE(!out.empty(), ErrorCode::InvalidInput, "scenarios: " + s.scenarios + " contains no scenarios");
    return out;
}

/// Routes records to --out or stdout and text to stdout, per the convention above.
class Sink {
public:
    Sink(const Common& c, std::ostream& out) : out_(out), text_(c.format == "text") {
        if (!c.out.empty()) {
            file_ = std::make_unique<std::ofstream>(c.out, std::ios::binary | std::ios::trunc);
            DOSEFIND_REQUIRE(file_->good(), ErrorCode::Io, "out: cannot open " + c.out + " for writing");
            path_ = c.out;
        }
    }
    bool text() const { return text_; }
    std::ostream* records() { return file_ ? static_cast<std::ostream*>(file_.get()) : text_ ? nullptr : &out_; }
    std::ostream& text_stream() { return out_; }
    void record(const json& j) {
        if (auto* r = records()) write_line(*r, j);
    }
    void finish() {
        if (file_) {
            file_->flush();
            DOSEFIND_REQUIRE(file_->good(), ErrorCode::Io, "out: write failed for " + path_);
        }
    }

private:
    std::ostream& out_;
    bool text_;
    std::unique_ptr<std::ofstream> file_;
    std::string path_;
};

inline std::string fmt(double x, int precision = 4) {
    std::ostringstream os;
    os << std::setprecision(precision) << x;
    return os.str();
}

inline std::string fmt_curve(const std::vector<double>& f) {
    std::string s = "(";
    for (std::size_t i = 0; i < f.size(); ++i) s += (i ? ", " : "") + fmt(f[i]);
    return s + ")";
}

inline std::string fmt_pct(double x) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << x;
    return os.str();
}

// ---------------------------------------------------------------------------
// classify

inline void run_classify(const Common& c, const DesignFlags& d, const ScenarioFlags& sf, std::ostream& out) {
    DOSEFIND_REQUIRE(d.dp1 > 0 && d.dp2 > 0, ErrorCode::InvalidInput, "dp1/dp2: must be positive");
    Sink sink(c, out);
    for (const ToxScenario& s : load_scenarios(sf, d.p)) {
        const CcdVerdict ccd = ccd_classify(s, d.dp1, d.dp2);
        json rec{{"scenario", scenario_json(s)}, {"dp1", d.dp1}, {"dp2", d.dp2}, {"mtd", ccd.mtd}, {"ccd", ccd_json(ccd)}};
        std::optional<std::vector<double>> skel;
        if (!d.skeleton.empty() || s.m() == 5 || s.m() == 10) skel = skeleton_for(d, s.m());
        std::optional<NominationTable> table;
        std::optional<CrmVerdict> crm;
        if (skel) {
            table = crm_nominations(s, *skel);
            crm = crm_classify(*table, ccd.mtd);
            rec["skeleton"] = *skel;
            rec["crm"] = crm_json(*table, *crm);
            rec["misspecification"] = misspec_distance(s, *skel, ccd.mtd);
        } else {
            rec["skeleton"] = nullptr;
            rec["crm"] = nullptr;
        }
        sink.record(rec);
        if (!sink.text()) continue;
        auto& o = sink.text_stream();
        o << "scenario " << (s.label.empty() ? "-" : s.label) << ": f=" << fmt_curve(s.f) << " p=" << fmt(s.p) << " MTD=" << ccd.mtd << '\n';
        o << "CCD: " << to_string(ccd.cls) << "  interval [" << fmt(s.p - d.dp1) << ", " << fmt(s.p + d.dp2) << "] holds {";
        for (std::size_t i = 0; i < ccd.levels_in_interval.size(); ++i) o << (i ? "," : "") << ccd.levels_in_interval[i];
        o << "}";
        if (ccd.boundary_case) o << "  (boundary case)";
        if (ccd.oscillation_pair) o << "  oscillation pair (" << ccd.oscillation_pair->first << "," << ccd.oscillation_pair->second << ")";
        if (!ccd.note.empty()) o << "  note: " << ccd.note;
        o << '\n';
        if (!crm) {
            o << "CRM: skipped (no default skeleton for m=" << s.m() << "; pass --skeleton)\n";
            continue;
        }
        o << "CRM: " << to_string(crm->cls) << "  skeleton " << fmt_curve(*skel) << "  misspecification "
          << fmt(rec["misspecification"].get<double>()) << '\n';
        o << "  level  theta      nominee\n";
        for (int u = 1; u <= s.m(); ++u)
            o << "  " << std::setw(5) << u << "  " << std::setw(9) << fmt(table->theta[static_cast<std::size_t>(u - 1)]) << "  "
              << table->nominee_of(u) << '\n';
    }
    sink.finish();
}

// ---------------------------------------------------------------------------
// gen-scenarios

struct GenFlags {
    int m = 5;
    std::size_t count = 2500;
    double p = 0.3;
    double inc_lo = 0.01, inc_hi = 0.40, edge_lo = 0.005, edge_hi = 0.95;
};

inline void run_gen(const Common& c, const GenFlags& g, std::ostream& out) {
    GenConfig cfg = default_gen_config(g.m, g.count, c.seed);
    cfg.p = g.p;
    cfg.inc_lo = g.inc_lo;
    cfg.inc_hi = g.inc_hi;
    cfg.edge_lo = g.edge_lo;
    cfg.edge_hi = g.edge_hi;
    const Ensemble e = gen_ensemble(cfg, c.workers);
    Sink sink(c, out);
    for (const auto& s : e.scenarios) {
        sink.record(ensemble_record(s, cfg));
        if (sink.text())
            sink.text_stream() << std::setw(5) << s.id << "  f=" << fmt_curve(s.scenario.f) << "  alpha#" << s.alpha_index << '\n';
    }
    if (sink.text())
        sink.text_stream() << e.scenarios.size() << " scenarios (m=" << g.m << ", seed " << c.seed << "), acceptance rate "
                           << fmt(e.acceptance_rate()) << '\n';
    sink.finish();
}

// ---------------------------------------------------------------------------
// simulate

struct SimFlags {
    std::size_t n = 1000;
    std::size_t reps = 100;
    double tail = 0.1;
};

inline void run_simulate(const Common& c, const DesignFlags& d, const ScenarioFlags& sf, const SimFlags& f, std::ostream& out) {
    DOSEFIND_REQUIRE(f.n >= 1, ErrorCode::InvalidInput, "n: need at least one subject");
    DOSEFIND_REQUIRE(f.reps >= 1, ErrorCode::InvalidInput, "reps: need at least one replication");
    DOSEFIND_REQUIRE(f.tail > 0 && f.tail <= 1, ErrorCode::InvalidInput, "tail: must lie in (0,1]");
    const auto scenarios = load_scenarios(sf, d.p, true);
    Sink sink(c, out);
    if (sink.text()) sink.text_stream() << "scenario        mtd  settled  at_mtd  recommended (share per level)\n";
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        const ToxScenario& s = scenarios[i];
        const DesignSpec spec = build_design(d, s.m());
        struct Rep {
            int recommended = 1;
            bool settled = false;
            int s1 = 1, s2 = 1;
            std::vector<std::int64_t> n, tox;
        };
        std::vector<Rep> reps(f.reps);
        parallel_for(f.reps, c.workers, [&](std::size_t r) {
            const auto t = run_trial(s, spec, f.n, derive_seed(c.seed, StreamTag::Replication, {i, r}));
            const auto ls = estimate_limit_set(t, f.tail);
            reps[r] = {t.recommended, ls.settled, ls.s1, ls.s2, t.final_state.n(), t.final_state.tox()};
        });

        // MTD only defined for strictly increasing curves inside (0,1).
        std::optional<int> mtd;
        try {
            validate(s);
            mtd = mtd_index(s);
        } catch (const Error&) {
        }
        const std::size_t m = static_cast<std::size_t>(s.m());
        std::vector<std::size_t> rec_count(m, 0);
        std::vector<double> mean_n(m, 0.0), mean_tox(m, 0.0);
        std::size_t settled = 0, at_mtd = 0;
        std::map<std::string, std::size_t> limit_sets;
        for (const Rep& r : reps) {
            ++rec_count[static_cast<std::size_t>(r.recommended - 1)];
            settled += r.settled;
            at_mtd += mtd && r.settled && r.s1 == *mtd;
            ++limit_sets[std::to_string(r.s1) + "-" + std::to_string(r.s2)];
            for (std::size_t u = 0; u < m; ++u) {
                mean_n[u] += static_cast<double>(r.n[u]) / static_cast<double>(f.reps);
                mean_tox[u] += static_cast<double>(r.tox[u]) / static_cast<double>(f.reps);
            }
        }
        const double denom = static_cast<double>(f.reps);
        json rec{{"scenario", scenario_json(s)},
                 {"design", design_json(spec)},
                 {"n", f.n},
                 {"reps", f.reps},
                 {"seed", c.seed},
                 {"tail_fraction", f.tail},
                 {"mtd", mtd ? json(*mtd) : json(nullptr)},
                 {"settled_fraction", static_cast<double>(settled) / denom},
                 {"settled_at_mtd", mtd ? json(static_cast<double>(at_mtd) / denom) : json(nullptr)},
                 {"limit_sets", limit_sets},
                 {"recommended_counts", rec_count},
                 {"mean_subjects", mean_n},
                 {"mean_toxicities", mean_tox}};
        sink.record(rec);
        if (sink.text()) {
            auto& o = sink.text_stream();
            o << std::left << std::setw(14) << (s.label.empty() ? std::to_string(i) : s.label) << std::right << std::setw(5)
              << (mtd ? std::to_string(*mtd) : "-") << std::setw(9) << fmt_pct(100.0 * static_cast<double>(settled) / denom) << "%"
              << std::setw(7) << (mtd ? fmt_pct(100.0 * static_cast<double>(at_mtd) / denom) + "%" : "-") << "  ";
            for (std::size_t u = 0; u < m; ++u) o << (u ? " " : "") << fmt_pct(100.0 * static_cast<double>(rec_count[u]) / denom);
            o << '\n';
        }
    }
    sink.finish();
}

// ---------------------------------------------------------------------------
// table1

struct Table1Flags {
    std::vector<int> m{5, 10};
    std::size_t count = 2500;
    double p = 0.3;
    std::vector<double> widths{0.1, 0.05};
};

inline void render_table1(std::ostream& o, const Table1& t, std::uint64_t seed) {
    o << "m=" << t.m << ", " << t.total() << " scenarios, p=" << fmt(t.p) << ", seed " << seed << ", skeleton " << fmt_curve(t.skeleton)
      << '\n';
    o << std::left << std::setw(12) << "CRM \\ CCD";
    for (double w : t.widths) o << "| width +-" << std::setw(25) << fmt(w);
    o << '\n' << std::setw(12) << "";
    for (std::size_t w = 0; w < t.widths.size(); ++w) o << "| " << std::right << std::setw(7) << "No0" << std::setw(8) << "No2plus" << std::setw(7) << "Yes" << std::setw(7) << "Total" << "  " << std::left;
    o << '\n';
    for (std::size_t r = 0; r < kCrmRows.size(); ++r) {
        o << std::left << std::setw(12) << to_string(kCrmRows[r]);
        for (std::size_t w = 0; w < t.widths.size(); ++w) {
            o << "| " << std::right;
            const int widths[3] = {7, 8, 7};
            for (std::size_t c = 0; c < kCcdCols.size(); ++c) o << std::setw(widths[c]) << fmt_pct(t.percent(t.counts[w][r][c]));
            o << std::setw(7) << fmt_pct(t.percent(t.crm_margin(r))) << "  " << std::left;
        }
        o << '\n';
    }
    o << std::left << std::setw(12) << "Total";
    for (std::size_t w = 0; w < t.widths.size(); ++w) {
        o << "| " << std::right;
        const int widths[3] = {7, 8, 7};
        for (std::size_t c = 0; c < kCcdCols.size(); ++c) o << std::setw(widths[c]) << fmt_pct(t.percent(t.ccd_margin(w, c)));
        o << std::setw(7) << fmt_pct(100.0) << "  " << std::left;
    }
    o << "\n\n";
}

inline void run_table1(const Common& c, const Table1Flags& f, const std::vector<double>& skeleton_flag, std::ostream& out) {
    DOSEFIND_REQUIRE(!f.m.empty(), ErrorCode::InvalidInput, "m: at least one level count");
    DOSEFIND_REQUIRE(f.count >= 1, ErrorCode::InvalidInput, "count: need at least one scenario");
    DOSEFIND_REQUIRE(!f.widths.empty(), ErrorCode::InvalidInput, "widths: at least one interval half-width");
    Sink sink(c, out);
    for (int m : f.m) {
        const std::vector<double> skel = skeleton_flag.empty() ? default_skeleton(m) : skeleton_flag;
        DOSEFIND_REQUIRE(static_cast<int>(skel.size()) == m, ErrorCode::InvalidInput,
                         "skeleton: expected " + std::to_string(m) + " entries, got " + std::to_string(skel.size()));
        GenConfig cfg = default_gen_config(m, f.count, c.seed);
        cfg.p = f.p;
        const Ensemble e = gen_ensemble(cfg, c.workers);
        std::vector<ToxScenario> scenarios;
        scenarios.reserve(e.scenarios.size());
        for (const auto& g : e.scenarios) scenarios.push_back(g.scenario);
        const Table1 t = table1_crosstab(scenarios, f.widths, skel, f.p, c.workers);

        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            const auto& v = t.rows[i];
            json ccd = json::object();
            for (std::size_t w = 0; w < f.widths.size(); ++w) ccd[fmt(f.widths[w])] = to_string(v.ccd[w]);
            sink.record({{"record", "scenario"},
                         {"m", m},
                         {"id", i},
                         {"seed", c.seed},
                         {"stream_seed", e.scenarios[i].stream_seed},
                         {"f", scenarios[i].f},
                         {"mtd", v.mtd},
                         {"crm", to_string(v.crm)},
                         {"ccd", ccd},
                         {"misspecification", v.misspecification}});
        }
        json cells = json::array();
        for (std::size_t w = 0; w < f.widths.size(); ++w)
            for (std::size_t r = 0; r < kCrmRows.size(); ++r)
                for (std::size_t col = 0; col < kCcdCols.size(); ++col)
                    cells.push_back({{"width", f.widths[w]},
                                     {"crm", to_string(kCrmRows[r])},
                                     {"ccd", to_string(kCcdCols[col])},
                                     {"count", t.counts[w][r][col]},
                                     {"percent", t.percent(t.counts[w][r][col])}});
        json crm_margins = json::object();
        for (auto cls : kCrmRows) crm_margins[to_string(cls)] = t.crm_margin_pct(cls);
        json ccd_margins = json::object();
        for (std::size_t w = 0; w < f.widths.size(); ++w) {
            json mw = json::object();
            for (auto cls : kCcdCols) mw[to_string(cls)] = t.ccd_margin_pct(w, cls);
            ccd_margins[fmt(f.widths[w])] = mw;
        }
        sink.record({{"record", "summary"},
                     {"m", m},
                     {"count", f.count},
                     {"p", f.p},
                     {"seed", c.seed},
                     {"skeleton", skel},
                     {"widths", f.widths},
                     {"acceptance_rate", e.acceptance_rate()},
                     {"cells", cells},
                     {"crm_margins", crm_margins},
                     {"ccd_margins", ccd_margins}});
        if (sink.text()) render_table1(sink.text_stream(), t, c.seed);
    }
    sink.finish();
}

// ---------------------------------------------------------------------------
// counterexample

struct CounterFlags {
    std::size_t n = 500;
    std::size_t reps = 100'000;
    int trap = 0;  // 0 = MTD
};

inline void run_counterexample(const Common& c, const DesignFlags& d, const ScenarioFlags& sf_in, const CounterFlags& f,
                               std::ostream& out) {
    ScenarioFlags sf = sf_in;
    if (sf.f.empty() && sf.scenarios.empty()) sf.f = {0.1, 0.3};
    DesignFlags pd = d;
    pd.design = "point";
    Sink sink(c, out);
    for (const ToxScenario& s : load_scenarios(sf, d.p, true)) {
        const DesignSpec spec = build_design(pd, s.m());
        const CounterexampleResult r = f.trap == 0 ? counterexample_point(s, spec, f.n, f.reps, c.seed, c.workers)
                                                   : counterexample_point(s, spec, f.n, f.reps, c.seed, f.trap, c.workers);
        const bool holds = r.trap_frequency >= r.lower_bound - 3.0 * r.mc_se;
        sink.record({{"scenario", scenario_json(s)},
                     {"design", design_json(spec)},
                     {"n", f.n},
                     {"reps", f.reps},
                     {"seed", c.seed},
                     {"trap_level", r.trap_level},
                     {"traps", r.traps},
                     {"trap_frequency", r.trap_frequency},
                     {"lower_bound", r.lower_bound},
                     {"mc_se", r.mc_se},
                     {"bound_holds", holds}});
        if (sink.text())
            sink.text_stream() << "f=" << fmt_curve(s.f) << " p=" << fmt(s.p) << " cohort " << spec.cohort << ", n=" << f.n << ", "
                               << f.reps << " replications\n"
                               << "trap at dose " << r.trap_level << ": frequency " << fmt(r.trap_frequency) << " (MC se "
                               << fmt(r.mc_se, 2) << "), canonical-path lower bound " << fmt(r.lower_bound) << " -> "
                               << (holds ? "bound holds" : "BOUND VIOLATED") << '\n';
    }
    sink.finish();
}

}  // namespace cli

/// Entry point shared by the binary and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dose-finding design analysis: convergence classifiers, simulation and live trial sessions", "dosefind"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Expand all help");

    cli::Common common;
    cli::DesignFlags design;
    cli::ScenarioFlags scen;

    auto* classify = app.add_subcommand("classify", "Classify a curve for interval designs and CRM");
    cli::add_common(classify, common);
    cli::add_design(classify, design, true);
    cli::add_scenarios(classify, scen);

    cli::GenFlags gen;
    auto* gen_cmd = app.add_subcommand("gen-scenarios", "Generate a random scenario ensemble (JSONL)");
    cli::add_common(gen_cmd, common);
    gen_cmd->add_option("--m", gen.m, "Dose levels")->capture_default_str();
    gen_cmd->add_option("--count", gen.count, "Number of scenarios")->capture_default_str();
    gen_cmd->add_option("--p", gen.p, "Target recorded with every scenario")->capture_default_str();
    gen_cmd->add_option("--inc-lo", gen.inc_lo, "Lower bound on interior increments")->capture_default_str();
    gen_cmd->add_option("--inc-hi", gen.inc_hi, "Upper bound on interior increments")->capture_default_str();
    gen_cmd->add_option("--edge-lo", gen.edge_lo, "Lower bound on f[1] and 1-f[m]")->capture_default_str();
    gen_cmd->add_option("--edge-hi", gen.edge_hi, "Upper bound on f[1] and 1-f[m]")->capture_default_str();

    cli::SimFlags sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo trials of one design on given curves");
    cli::add_common(sim_cmd, common);
    cli::add_design(sim_cmd, design, true);
    cli::add_scenarios(sim_cmd, scen);
    sim_cmd->add_option("--n", sim.n, "Subjects per trial")->capture_default_str();
    sim_cmd->add_option("--reps", sim.reps, "Replications per scenario")->capture_default_str();
    sim_cmd->add_option("--tail", sim.tail, "Tail fraction for the limit-set estimate")->capture_default_str();

    cli::Table1Flags t1;
    std::vector<double> t1_skeleton;
    auto* t1_cmd = app.add_subcommand("table1", "CRM x interval-design convergence cross-tabulation");
    cli::add_common(t1_cmd, common);
    t1_cmd->add_option("--m", t1.m, "Level counts, comma separated")->delimiter(',')->capture_default_str();
    t1_cmd->add_option("--count", t1.count, "Scenarios per level count")->capture_default_str();
    t1_cmd->add_option("--p", t1.p, "Target toxicity rate")->capture_default_str();
    t1_cmd->add_option("--widths", t1.widths, "Interval half-widths, comma separated")->delimiter(',')->capture_default_str();
    t1_cmd->add_option("--skeleton", t1_skeleton, "CRM skeleton (default for m = 5 or 10)")->delimiter(',');

    cli::CounterFlags cx;
    auto* cx_cmd = app.add_subcommand("counterexample", "Point-design trap frequency versus its canonical-path bound");
    cli::add_common(cx_cmd, common);
    cli::add_design(cx_cmd, design, true);
    cli::add_scenarios(cx_cmd, scen);
    cx_cmd->add_option("--n", cx.n, "Subjects per trial")->capture_default_str();
    cx_cmd->add_option("--reps", cx.reps, "Replications")->capture_default_str();
    cx_cmd->add_option("--trap", cx.trap, "Trap level (0 = the MTD)")->capture_default_str();

    std::string listen;
    std::string log_path = "dosefind-sessions.jsonl";
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP trial-session service");
    serve_cmd->add_option("--listen", listen, "host:port (default $DOSEFIND_LISTEN or 127.0.0.1:8080)");
    serve_cmd->add_option("--log", log_path, "Append-only session event log")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);  // --help
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    }

    try {
        if (*classify) cli::run_classify(common, design, scen, out);
        else if (*gen_cmd) cli::run_gen(common, gen, out);
        else if (*sim_cmd) cli::run_simulate(common, design, scen, sim, out);
        else if (*t1_cmd) cli::run_table1(common, t1, t1_skeleton, out);
        else if (*cx_cmd) cli::run_counterexample(common, design, scen, cx, out);
        else if (*serve_cmd) {
            SessionStore store(log_path);
            serve(resolve_listen(listen), store, err);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace dosefind::app

#pragma once

// Live trial sessions driven over HTTP.
//
// State is never stored authoritatively: every mutation is appended to a
// JSONL event log first and then applied, and a restarted store rebuilds
// each session by replaying its events through the same code path. All
// decisions come from the pure design functions.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "dosefind/app/records.hpp"
#include "dosefind/designs.hpp"
#include "dosefind/model.hpp"
#include "dosefind/rng.hpp"

namespace dosefind::app {

/// An HTTP-status-carrying failure; `body` is returned to the client as is.
class ApiError : public std::runtime_error {
public:
    ApiError(int status, json body) : std::runtime_error(body.value("error", "error")), status_(status), body_(std::move(body)) {}
    ApiError(int status, const std::string& message) : ApiError(status, json{{"error", message}}) {}
    ApiError(int status, const char* message) : ApiError(status, std::string(message)) {}
    int status() const { return status_; }
    const json& body() const { return body_; }

private:
    int status_;
    json body_;
};

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                  tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return buf;
}

struct AuditEntry {
    std::string ts;
    int dose = 1;
    std::vector<int> outcomes;
    bool simulated = false;
};

struct Session {
    std::string id;
    std::string created;
    DesignSpec spec;
    std::optional<ToxScenario> scenario;  // simulation-assist mode only
    std::uint64_t seed = 0;
    TrialState state;
    std::vector<AuditEntry> audit;
    bool closed = false;
    std::string decision_reason = "no observations yet: start dose";
    std::optional<int> recommended;
    mutable std::mutex mu;
};

class SessionStore {
public:
    using Clock = std::function<std::string()>;

    /// With a log path, existing events are replayed and new ones appended.
    explicit SessionStore(std::optional<std::filesystem::path> log = std::nullopt, Clock clock = utc_timestamp)
        : log_path_(std::move(log)), clock_(std::move(clock)) {
        if (log_path_) {
            replay();
            log_.open(*log_path_, std::ios::app);
            if (!log_) throw Error(ErrorCode::Io, "cannot open session log " + log_path_->string());
        }
    }

    json create(const json& body) {
        if (!body.is_object()) throw ApiError(400, "body: expected a JSON object");
        json ev{{"event", "create"}, {"ts", clock_()}};
        std::unique_lock lk(map_mu_);
        ev["id"] = make_id(next_seq_);
        ev["body"] = body;
        auto s = build(ev);  // validates before anything is logged
        append(ev);
        ++next_seq_;
        Session& ref = *s;
        sessions_.emplace(ref.id, std::move(s));
        return snapshot(ref, true);
    }

    json get(const std::string& id) const {
        const Session& s = find(id);
        std::lock_guard lk(s.mu);
        return snapshot(s, true);
    }

    json submit(const std::string& id, const json& body) {
        Session& s = find(id);
        std::lock_guard lk(s.mu);
        auto [dose, outcomes] = parse_outcomes(s, body);
        json ev{{"event", "outcomes"}, {"id", id}, {"ts", clock_()}, {"dose", dose}, {"outcomes", outcomes}};
        append(ev);
        apply_outcomes(s, ev);
        return snapshot(s, false);
    }

    /// Draws `cohorts` cohorts (default 1) from the session's scenario. Cohort
    /// c uses its own stream derived from (session seed, c).
    json simulate(const std::string& id, const json& body) {
        Session& s = find(id);
        std::lock_guard lk(s.mu);
        if (!s.scenario) throw ApiError(409, "session has no scenario: simulation-assist mode is off");
        if (s.closed) throw ApiError(409, "session is closed");
        int cohorts = 1;
        if (body.is_object() && body.contains("cohorts")) {
            if (!body["cohorts"].is_number_integer() || body["cohorts"].get<int>() < 1 || body["cohorts"].get<int>() > 10'000)
                throw ApiError(400, "cohorts: expected an integer in 1..10000");
            cohorts = body["cohorts"].get<int>();
        } else if (!body.is_null() && !body.is_object()) {
            throw ApiError(400, "body: expected a JSON object");
        }
        json drawn = json::array();
        for (int c = 0; c < cohorts; ++c) {
            Rng rng(derive_seed(s.seed, StreamTag::Session, {static_cast<std::uint64_t>(s.audit.size())}));
            const int dose = s.state.current();
            std::vector<int> outcomes;
            for (int j = 0; j < s.spec.cohort; ++j) outcomes.push_back(rng.bernoulli(s.scenario->at(dose)) ? 1 : 0);
            json ev{{"event", "outcomes"}, {"id", id}, {"ts", clock_()}, {"dose", dose}, {"outcomes", outcomes}, {"simulated", true}};
            append(ev);
            apply_outcomes(s, ev);
            drawn.push_back({{"dose", dose}, {"outcomes", outcomes}});
        }
        json out = snapshot(s, false);
        out["simulated"] = drawn;
        return out;
    }

    /// Idempotent: closing again returns the same recommendation.
    json close(const std::string& id) {
        Session& s = find(id);
        std::lock_guard lk(s.mu);
        if (!s.closed) {
            json ev{{"event", "close"}, {"id", id}, {"ts", clock_()}};
            append(ev);
            apply_close(s);
        }
        return {{"id", s.id}, {"recommended_mtd", *s.recommended}, {"status", "closed"}};
    }

    std::size_t size() const {
        std::shared_lock lk(map_mu_);
        return sessions_.size();
    }

private:
    static std::string make_id(std::uint64_t seq) {
        char buf[20];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(derive_seed(0x5e55, StreamTag::Session, {seq})));
        return buf;
    }

    Session& find(const std::string& id) const {
        std::shared_lock lk(map_mu_);
        const auto it = sessions_.find(id);
        if (it == sessions_.end()) throw ApiError(404, "unknown session id '" + id + "'");
        return *it->second;
    }

    static int levels_of(const json& body) {
        if (body.contains("m")) {
            if (!body["m"].is_number_integer() || body["m"].get<int>() < 1 || body["m"].get<int>() > 100)
                throw ApiError(400, "m: expected an integer in 1..100");
            return body["m"].get<int>();
        }
        if (body.contains("skeleton") && body["skeleton"].is_array()) return static_cast<int>(body["skeleton"].size());
        if (body.contains("scenario") && body["scenario"].is_object() && body["scenario"].contains("f") && body["scenario"]["f"].is_array())
            return static_cast<int>(body["scenario"]["f"].size());
        throw ApiError(400, "m: number of dose levels is required");
    }

    /// Builds a session from a create event; InvalidInput becomes a 400.
    static std::unique_ptr<Session> build(const json& ev) {
        const json& body = ev["body"];
        auto s = std::make_unique<Session>();
        s->id = ev["id"].get<std::string>();
        s->created = ev["ts"].get<std::string>();
        try {
            const int m = levels_of(body);
            s->spec = parse_design(body, m);
            if (body.contains("scenario") && !body["scenario"].is_null()) {
                s->scenario = parse_scenario(body["scenario"], s->spec.p, "scenario");
                DOSEFIND_REQUIRE(s->scenario->m() == m, ErrorCode::InvalidInput,
                                 "scenario: expected " + std::to_string(m) + " levels, got " + std::to_string(s->scenario->m()));
            }
            if (body.contains("seed")) {
                const json& seed = body["seed"];
                DOSEFIND_REQUIRE(seed.is_number_unsigned() || (seed.is_number_integer() && seed.get<std::int64_t>() >= 0),
                                 ErrorCode::InvalidInput, "seed: expected a non-negative integer");
                s->seed = body["seed"].get<std::uint64_t>();
            }
            s->state = TrialState(m, s->spec.start);
        } catch (const Error& e) {
            throw ApiError(400, e.what());
        }
        return s;
    }

    static std::pair<int, std::vector<int>> parse_outcomes(const Session& s, const json& body) {
        if (!body.is_object()) throw ApiError(400, "body: expected a JSON object");
        if (!body.contains("dose") || !body["dose"].is_number_integer()) throw ApiError(400, "dose: expected an integer level");
        if (!body.contains("outcomes") || !body["outcomes"].is_array()) throw ApiError(400, "outcomes: expected an array of 0/1 values");
        std::vector<int> outcomes;
        const json& arr = body["outcomes"];
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const json& v = arr[i];
            if (v.is_boolean()) outcomes.push_back(v.get<bool>() ? 1 : 0);
            else if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1)) outcomes.push_back(v.get<int>());
            else throw ApiError(400, "outcomes[" + std::to_string(i + 1) + "]: expected 0 or 1");
        }
        if (static_cast<int>(outcomes.size()) != s.spec.cohort)
            throw ApiError(400, "outcomes: expected " + std::to_string(s.spec.cohort) + " values for the cohort, got " +
                                    std::to_string(outcomes.size()));
        if (s.closed) throw ApiError(409, "session is closed");
        const int dose = body["dose"].get<int>();
        if (dose != s.state.current())
            throw ApiError(409, json{{"error", "dose " + std::to_string(dose) + " is not the current recommendation"},
                                     {"expected_dose", s.state.current()}});
        return {dose, outcomes};
    }

    static void apply_outcomes(Session& s, const json& ev) {
        AuditEntry a;
        a.ts = ev["ts"].get<std::string>();
        a.dose = ev["dose"].get<int>();
        a.outcomes = ev["outcomes"].get<std::vector<int>>();
        a.simulated = ev.value("simulated", false);
        for (int o : a.outcomes) s.state.record(a.dose, o != 0);
        const Decision d = decide(s.state, s.spec);
        s.state.move_to(d.next);
        s.decision_reason = d.reason;
        s.audit.push_back(std::move(a));
    }

    static void apply_close(Session& s) {
        s.closed = true;
        s.recommended = recommend_mtd(s.state, s.spec);
    }

    /// Chart data: the fitted model curve for CRM, the monotonized estimates
    /// (linearly interpolated across untried levels) for the point design,
    /// and the decision band for interval designs.
    static json curve(const Session& s) {
        const DesignSpec& d = s.spec;
        json c{{"target", d.p}};
        switch (d.kind) {
            case DesignKind::Interval: {
                const IntervalRule rule(d);
                c["kind"] = "interval-band";
                c["band"] = {rule.lower().to_double(), rule.upper().to_double()};
                c["values"] = nullptr;
                break;
            }
            case DesignKind::Point: {
                c["kind"] = "isotonic";
                c["band"] = nullptr;
                if (s.state.empty()) {
                    c["values"] = nullptr;
                    break;
                }
                const auto mono = monotonize(fhat(s.state));
                std::vector<std::optional<double>> v;
                for (int u = 1; u <= s.state.m(); ++u) v.push_back(mono.at(u) ? std::optional(mono.at(u)->to_double()) : std::nullopt);
                json vals = json::array();
                for (std::size_t u = 0; u < v.size(); ++u) {
                    if (v[u]) {
                        vals.push_back(*v[u]);
                        continue;
                    }
                    std::size_t lo = u, hi = u;
                    while (lo > 0 && !v[lo]) --lo;
                    while (hi + 1 < v.size() && !v[hi]) ++hi;
                    if (v[lo] && v[hi] && lo < u && u < hi)
                        vals.push_back(*v[lo] + (*v[hi] - *v[lo]) * static_cast<double>(u - lo) / static_cast<double>(hi - lo));
                    else
                        vals.push_back(nullptr);
                }
                c["values"] = vals;
                break;
            }
            case DesignKind::Crm: {
                c["kind"] = "crm-model";
                c["band"] = nullptr;
                if (s.state.empty()) {
                    c["theta"] = nullptr;
                    c["values"] = d.skeleton;
                } else {
                    const double theta = crm_fit_theta(s.state, d);
                    c["theta"] = theta;
                    c["values"] = crm_curve(d.skeleton, theta);
                }
                break;
            }
        }
        return c;
    }

    static json snapshot(const Session& s, bool full) {
        json j{{"id", s.id},
               {"status", s.closed ? "closed" : "active"},
               {"next_dose", s.state.current()},
               {"decision_reason", s.decision_reason},
               {"estimates", estimates_json(s.state)},
               {"curve", curve(s)}};
        if (!full) return j;
        j["created"] = s.created;
        j["design"] = design_json(s.spec);
        j["m"] = s.state.m();
        j["scenario"] = s.scenario ? scenario_json(*s.scenario) : json(nullptr);
        j["seed"] = s.seed;
        j["state"] = {{"current", s.state.current()}, {"n", s.state.n()}, {"tox", s.state.tox()}, {"subjects", s.state.size()}};
        json audit = json::array();
        for (const auto& a : s.audit) {
            json e{{"ts", a.ts}, {"dose", a.dose}, {"outcomes", a.outcomes}};
            if (a.simulated) e["simulated"] = true;
            audit.push_back(std::move(e));
        }
        j["audit"] = std::move(audit);
        j["recommended_mtd"] = s.recommended ? json(*s.recommended) : json(nullptr);
        return j;
    }

    void append(const json& ev) {
        if (!log_path_) return;
        std::lock_guard lk(log_mu_);
        log_ << ev.dump() << '\n';
        log_.flush();
        if (!log_) throw ApiError(500, "cannot write session log " + log_path_->string());
    }

    void replay() {
        std::ifstream in(*log_path_);
        if (!in) return;  // first start
        std::string line;
        std::size_t lineno = 0;
        std::uintmax_t good_end = 0;  // byte offset just past the last complete event
        bool torn = false;
        while (std::getline(in, line)) {
            ++lineno;
            const bool terminated = !in.eof();
            if (line.empty()) {
                good_end = static_cast<std::uintmax_t>(in.tellg());
                continue;
            }
            json ev;
            try {
                ev = json::parse(line);
            } catch (const json::parse_error&) {
                // A torn final line from a crash is dropped; anything else is corruption.
                if (in.peek() == std::char_traits<char>::eof()) {
                    torn = true;
                    break;
                }
                throw Error(ErrorCode::Io, log_path_->string() + ":" + std::to_string(lineno) + ": malformed event");
            }
            if (!terminated) {
                torn = true;
                break;
            }
            good_end = static_cast<std::uintmax_t>(in.tellg());
            try {
                const std::string kind = ev.at("event").get<std::string>();
                if (kind == "create") {
                    auto s = build(ev);
                    const std::string id = s->id;
                    sessions_.emplace(id, std::move(s));
                    ++next_seq_;
                } else if (kind == "outcomes") {
                    apply_outcomes(*sessions_.at(ev.at("id").get<std::string>()), ev);
                } else if (kind == "close") {
                    apply_close(*sessions_.at(ev.at("id").get<std::string>()));
                }
            } catch (const std::exception& e) {
                throw Error(ErrorCode::Io, log_path_->string() + ":" + std::to_string(lineno) + ": cannot replay event (" + e.what() + ")");
            }
        }
        in.close();
        // Cut the torn tail so the next append starts on a fresh line.
        if (torn) std::filesystem::resize_file(*log_path_, good_end);
    }

    std::optional<std::filesystem::path> log_path_;
    Clock clock_;
    std::ofstream log_;
    std::mutex log_mu_;
    mutable std::shared_mutex map_mu_;
    std::map<std::string, std::unique_ptr<Session>> sessions_;
    std::uint64_t next_seq_ = 0;
};

}  // namespace dosefind::app

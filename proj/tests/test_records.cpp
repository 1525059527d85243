#include <gtest/gtest.h>

#include <sstream>

#include "dosefind/app/records.hpp"

using namespace dosefind;
using namespace dosefind::app;

namespace {

std::string message_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST(Records, EnsembleLineRoundTripsThroughParseScenario) {
    const GenConfig cfg = default_gen_config(5, 20, 77);
    const Ensemble e = gen_ensemble(cfg);
    for (const auto& g : e.scenarios) {
        const json j = json::parse(ensemble_record(g, cfg).dump());
        EXPECT_EQ(j["id"].get<std::size_t>(), g.id);
        EXPECT_EQ(j["m"].get<int>(), 5);
        EXPECT_EQ(j["seed_info"]["master_seed"].get<std::uint64_t>(), 77u);
        EXPECT_EQ(j["seed_info"]["stream_seed"].get<std::uint64_t>(), g.stream_seed);
        EXPECT_EQ(j["alpha_used"].get<std::vector<double>>(), g.alpha);
        const ToxScenario back = parse_scenario(j, 0.3);
        // shortest round-trip formatting: bit-identical doubles
        EXPECT_EQ(back.f, g.scenario.f);
        EXPECT_EQ(back.label, std::to_string(g.id));
    }
}

TEST(Records, ScenarioTakesRecordPUnlessOverridden) {
    const json j{{"f", {0.1, 0.2, 0.4}}, {"p", 0.25}, {"label", "a"}};
    EXPECT_DOUBLE_EQ(parse_scenario(j, std::nullopt).p, 0.25);
    EXPECT_DOUBLE_EQ(parse_scenario(j, 0.3).p, 0.3);
    EXPECT_EQ(parse_scenario(j, std::nullopt).label, "a");
}

TEST(Records, ParseErrorsNameTheField) {
    EXPECT_NE(message_of([] { parse_scenario(json{{"p", 0.3}}, std::nullopt); }).find("'f'"), std::string::npos);
    EXPECT_NE(message_of([] { parse_scenario(json{{"f", {0.1, 0.2}}}, std::nullopt); }).find("'p'"), std::string::npos);
    EXPECT_NE(message_of([] { parse_scenario(json{{"f", {0.1, "x"}}}, 0.3); }).find("f[2]"), std::string::npos);
    EXPECT_NE(message_of([] { parse_scenario(json{{"f", {0.3, 0.2}}}, 0.3); }).find("levels 1,2"), std::string::npos);
}

TEST(Records, ReadScenariosSkipsBlankLinesAndNamesBadLine) {
    std::istringstream ok("{\"f\":[0.1,0.2]}\n\n  \n{\"f\":[0.2,0.5],\"id\":7}\n");
    const auto v = read_scenarios(ok, 0.3);
    ASSERT_EQ(v.size(), 2u);
    EXPECT_EQ(v[1].label, "7");

    std::istringstream bad_json("{\"f\":[0.1,0.2]}\n{oops\n");
    EXPECT_NE(message_of([&] { read_scenarios(bad_json, 0.3); }).find("line 2: malformed JSON"), std::string::npos);

    std::istringstream bad_value("\n{\"f\":[0.1,0.2]}\n{\"f\":[0.1,1.5]}\n");
    const std::string msg = message_of([&] { read_scenarios(bad_value, 0.3); });
    EXPECT_NE(msg.find("line 3"), std::string::npos);
    EXPECT_NE(msg.find("level 2"), std::string::npos);
}

TEST(Records, DesignRoundTrip) {
    DesignSpec d;
    d.kind = DesignKind::Crm;
    d.p = 0.25;
    d.cohort = 3;
    d.start = 2;
    d.skeleton = {0.05, 0.1, 0.2, 0.4, 0.8};
    d.no_skip = true;
    const DesignSpec back = parse_design(json::parse(design_json(d).dump()), 5);
    EXPECT_EQ(back.kind, DesignKind::Crm);
    EXPECT_EQ(back.p, 0.25);
    EXPECT_EQ(back.cohort, 3);
    EXPECT_EQ(back.start, 2);
    EXPECT_EQ(back.skeleton, d.skeleton);
    EXPECT_TRUE(back.no_skip);
}

TEST(Records, DesignDefaultsAndErrors) {
    const DesignSpec d = parse_design(json{{"design", "interval"}, {"p", 0.3}}, 4);
    EXPECT_EQ(d.dp1, 0.1);
    EXPECT_EQ(d.dp2, 0.1);
    EXPECT_EQ(d.cohort, 1);
    EXPECT_FALSE(d.interval_monotonized);

    EXPECT_NE(message_of([] { parse_design(json{{"p", 0.3}}, 4); }).find("'design'"), std::string::npos);
    EXPECT_THROW(parse_design(json{{"design", "bogus"}, {"p", 0.3}}, 4), Error);
    EXPECT_NE(message_of([] { parse_design(json{{"design", "point"}, {"p", 0.3}, {"cohort", 1.5}}, 4); }).find("cohort"),
              std::string::npos);
    EXPECT_THROW(parse_design(json{{"design", "point"}, {"p", 0.3}, {"start", 9}}, 4), Error);
    // crm needs a skeleton of length m
    EXPECT_THROW(parse_design(json{{"design", "crm"}, {"p", 0.3}, {"skeleton", {0.1, 0.2}}}, 4), Error);
}

TEST(Records, EstimatesCarryExactAndMonotonizedValues) {
    TrialState s(3, 1);
    s.record(1, true);
    s.record(1, false);
    s.record(2, false);
    const json rows = estimates_json(s);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0]["raw_exact"], "1/2");
    EXPECT_EQ(rows[1]["raw_exact"], "0");
    // levels 1 and 2 pool to 1/3
    EXPECT_EQ(rows[0]["monotonized_exact"], "1/3");
    EXPECT_EQ(rows[1]["monotonized_exact"], "1/3");
    EXPECT_NEAR(rows[0]["monotonized"].get<double>(), 1.0 / 3.0, 1e-15);
    EXPECT_TRUE(rows[2]["raw"].is_null());
    EXPECT_TRUE(rows[2]["monotonized"].is_null());
    EXPECT_EQ(rows[2]["n"], 0);
}

TEST(Records, EstimatesOnEmptyStateAreNull) {
    const json rows = estimates_json(TrialState(2, 1));
    for (const auto& r : rows) {
        EXPECT_TRUE(r["raw"].is_null());
        EXPECT_TRUE(r["monotonized"].is_null());
    }
}

TEST(Records, CcdRecordHasOscillationPair) {
    const ToxScenario s = make_scenario({0.05, 0.15, 0.45, 0.6}, 0.3);
    const json j = ccd_json(ccd_classify(s, 0.1, 0.1));
    EXPECT_EQ(j["class"], "No0");
    EXPECT_EQ(j["oscillation_pair"], json::array({2, 3}));
}

#include "adcast/errors.hpp"
#include "adcast/simgen/simgen.hpp"
#include "adcast/stats.hpp"

#include <doctest.h>

#include <cmath>

using namespace adcast;
using namespace adcast::sim;

namespace {

MarketConfig small(std::uint64_t seed = 7) {
    MarketConfig c;
    c.n_advertisers = 8;
    c.n_clusters = 2;
    c.n_days = 400;
    c.seed = seed;
    return c;
}

} // namespace

TEST_CASE("default simulation shape") {
    const auto r = simulate(MarketConfig{});
    CHECK(r.panel.size() == 20);
    for (const auto& s : r.panel.advertisers()) {
        CHECK(s.size() == 1100);
        const int label = r.truth.cluster_of.at(s.advertiser_id);
        CHECK(label >= 0);
        CHECK(label < 4);
        for (std::size_t t = 0; t < s.size(); ++t) {
            CHECK(std::isfinite(s.cpc[t]));
            CHECK(s.cpc[t] * s.adclicks[t] == doctest::Approx(s.adcost[t]).epsilon(1e-12));
        }
    }
}

TEST_CASE("simulation is a deterministic function of the config") {
    CHECK(simulate(small()).panel == simulate(small()).panel);
    CHECK_FALSE(simulate(small(1)).panel == simulate(small(2)).panel);
}

TEST_CASE("config validation lists every problem") {
    MarketConfig c;
    c.n_clusters = 30;
    c.n_days = 50;
    try {
        simulate(c);
        FAIL("expected validation error");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("n_clusters") != std::string::npos);
        CHECK(msg.find("n_days") != std::string::npos);
    }
}

TEST_CASE("default calibration matches the target correlation band") {
    const auto report = validate_calibration(simulate(MarketConfig{}).panel);
    REQUIRE(report.corr_clicks_budget.has_value());
    CHECK(*report.corr_clicks_budget >= 0.6);
    CHECK(*report.corr_clicks_budget <= 0.8);
    CHECK(report.weekly_strength.size() == 20);
    CHECK_FALSE(report.undefined);
}

TEST_CASE("noise-free linear click response correlates almost perfectly") {
    MarketConfig c;
    c.noise_scale = 0.0;
    c.click_elasticity = 1.0;
    // CPC independent of budget and no weekly click pattern: clicks are proportional to the monthly budget.
    c.budget_elasticity = 0.0;
    c.weekly_amp_range = {0.0, 0.0};
    const auto report = validate_calibration(simulate(c).panel);
    CHECK(*report.corr_clicks_budget >= 0.99);
}

TEST_CASE("constant budgets make the correlation undefined") {
    std::vector<AdvertiserSeries> series;
    for (int i = 0; i < 2; ++i) {
        AdvertiserSeries s;
        s.advertiser_id = "a" + std::to_string(i);
        s.category = "c";
        s.start = parse_date("2021-01-01");
        s.adcost.assign(31, 5.0);
        s.adclicks.assign(31, 2.0);
        s.impressions.assign(31, 20.0);
        series.push_back(extract_budget(derive_cpc(std::move(s))));
    }
    const auto report = validate_calibration(PanelDataset(std::move(series)));
    CHECK(report.undefined);
    CHECK(report.undefined_count == 2);
    CHECK_FALSE(report.corr_clicks_budget.has_value());
}

TEST_CASE("shock windows") {
    MarketConfig c;
    c.shock = ShockConfig{};
    c.shock->date = parse_date("2020-03-15");
    const auto w = shock_windows(c);
    CHECK(w.pre.first == parse_date("2019-09-01"));
    CHECK(w.pre.last == parse_date("2019-11-01"));
    CHECK(w.post1.first == parse_date("2020-05-01"));
    CHECK(w.post1.last == parse_date("2020-07-01"));
    CHECK(w.post2.first == parse_date("2020-09-01"));
    CHECK(w.post2.last == parse_date("2020-11-01"));
    CHECK_FALSE(w.pre.overlaps(w.post1));
    CHECK_FALSE(w.post1.overlaps(w.post2));
    CHECK_FALSE(w.pre.contains(c.shock->date));

    CHECK_THROWS_AS(shock_windows(MarketConfig{}), ValidationError);
    c.n_days = 500;
    CHECK_THROWS_AS(shock_windows(c), ValidationError);
}

TEST_CASE("shock lowers affected CPC") {
    MarketConfig c;
    c.shock = ShockConfig{};
    c.shock->date = parse_date("2020-03-15");
    c.shock->affected_categories = {"cat_00", "cat_01", "cat_02", "cat_03"};
    const auto r = simulate(c);
    const std::size_t at = r.panel.offset_of(c.shock->date);
    double pre = 0.0, post = 0.0;
    for (const auto& s : r.panel.advertisers()) {
        for (std::size_t t = at - 60; t < at; ++t) pre += s.cpc[t];
        for (std::size_t t = at; t < at + 60; ++t) post += s.cpc[t];
    }
    CHECK(post <= 0.8 * pre);
}

TEST_CASE("planted clusters have higher within-cluster CPC correlation") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        MarketConfig c;
        c.seed = seed;
        const auto r = simulate(c);
        const auto& a = r.panel.advertisers();
        double within = 0.0, between = 0.0;
        int nw = 0, nb = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            for (std::size_t j = i + 1; j < a.size(); ++j) {
                const double corr = *stats::pearson(a[i].cpc, a[j].cpc);
                if (r.truth.cluster_of.at(a[i].advertiser_id) == r.truth.cluster_of.at(a[j].advertiser_id)) {
                    within += corr;
                    ++nw;
                } else {
                    between += corr;
                    ++nb;
                }
            }
        }
        CHECK(within / nw > between / nb);
    }
}

TEST_CASE("config and ground truth json round-trip") {
    MarketConfig c = small();
    c.shock = ShockConfig{};
    c.shock->date = parse_date("2019-06-01");
    c.shock->affected_categories = {"cat_01"};
    const nlohmann::json j = c;
    const auto back = j.get<MarketConfig>();
    CHECK(nlohmann::json(back) == j);
    CHECK(simulate(back).panel == simulate(c).panel);

    const auto truth = simulate(c).truth;
    const nlohmann::json tj = truth;
    const auto tback = tj.get<GroundTruth>();
    CHECK(tback.cluster_of == truth.cluster_of);
    CHECK(tback.shock_date == truth.shock_date);

    CHECK_THROWS_AS(nlohmann::json::parse(R"({"n_days": "many"})").get<MarketConfig>(), ValidationError);
}

#include "adcast/errors.hpp"
#include "adcast/panel/panel.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace adcast;

namespace {

constexpr const char* kHeader = "advertiser_id,date,category,adcost,adclicks,impressions\n";

std::string clean_csv(int ids, int days, int missing_for_first = 0) {
    std::ostringstream out;
    out << kHeader;
    for (int a = 0; a < ids; ++a) {
        for (int d = 0; d < days; ++d) {
            const Date date = add_days(parse_date("2020-01-01"), d);
            if (a == 0 && d > 0 && d <= missing_for_first) {
                out << "a" << a << "," << format_date(date) << ",cat" << a % 2 << ",,,\n";
                continue;
            }
            out << "a" << a << "," << format_date(date) << ",cat" << a % 2 << "," << 10 + d % 5 << "," << 5 + a
                << "," << 100 << "\n";
        }
    }
    return out.str();
}

PanelDataset ingest(const std::string& text) {
    std::istringstream in(text);
    return ingest_csv(in);
}

AdvertiserSeries series_of(std::vector<double> cost, std::vector<double> clicks) {
    AdvertiserSeries s;
    s.advertiser_id = "x";
    s.category = "c";
    s.start = parse_date("2021-01-01");
    s.impressions.assign(cost.size(), 100.0);
    s.adcost = std::move(cost);
    s.adclicks = std::move(clicks);
    return s;
}

} // namespace

TEST_CASE("ingest produces one aligned series per advertiser") {
    const PanelDataset p = ingest(clean_csv(3, 100));
    REQUIRE(p.size() == 3);
    for (const auto& s : p.advertisers()) CHECK(s.size() == 100);
    CHECK(p.categories().size() == 2);
    CHECK(p.n_days() == 100);
    CHECK(p == ingest(clean_csv(3, 100)));
}

TEST_CASE("ingest reports positioned parse errors") {
    std::string text = std::string(kHeader) + "a,2020-01-01,c,1,1,1\n" + "a,2020-13-01,c,1,1,1\n";
    try {
        ingest(text);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(ingest(std::string(kHeader) + "a,2020-01-01,c,1,1\n"), ParseError);
    CHECK_THROWS_AS(ingest(std::string(kHeader) + "a,2020-01-01,c,-1,1,1\n"), ParseError);
    CHECK_THROWS_AS(ingest("id,date\n"), ParseError);
}

TEST_CASE("duplicate rows are rejected naming the pair") {
    const std::string text = std::string(kHeader) + "a,2020-01-01,c,1,1,1\na,2020-01-01,c,2,2,2\n";
    try {
        ingest(text);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("a, 2020-01-01") != std::string::npos);
    }
}

TEST_CASE("gaps become missing rows over the union range") {
    const std::string text = std::string(kHeader) + "a,2020-01-01,c,1,1,1\na,2020-01-04,c,1,1,1\nb,2020-01-02,c,1,1,1\n";
    const PanelDataset p = ingest(text);
    CHECK(p.n_days() == 4);
    CHECK(std::isnan(p.at("a").adcost[1]));
    CHECK(std::isnan(p.at("b").adcost[0]));
    CHECK(std::isnan(p.at("b").adcost[3]));
}

TEST_CASE("write_csv round-trips") {
    const PanelDataset p = ingest(clean_csv(2, 40, 3));
    std::ostringstream out;
    write_csv(out, p);
    CHECK(ingest(out.str()) == p);
}

TEST_CASE("missing-value filter follows the one-percent rule") {
    const PanelDataset four = ingest(clean_csv(2, 100, 4));
    CHECK(missing_fraction(four.at("a0")) == doctest::Approx(0.04));
    CHECK(filter_missing(four).size() == 1);

    const PanelDataset tenth = ingest(clean_csv(2, 1000, 1));
    CHECK(filter_missing(tenth).size() == 2);
    CHECK(filter_missing(tenth, 0.0).size() == 1);

    const PanelDataset once = filter_missing(four);
    CHECK(filter_missing(once) == once);

    const PanelDataset only = ingest(clean_csv(1, 100, 4));
    CHECK_THROWS_WITH_AS(filter_missing(only), "no advertisers survive the missing-value filter", ValidationError);
}

TEST_CASE("linear interpolation") {
    const double m = kMissing;
    CHECK(interpolate_linear(std::vector<double>{2, m, 4}) == std::vector<double>{2, 3, 4});
    CHECK(interpolate_linear(std::vector<double>{1, m, m, 4}) == std::vector<double>{1, 2, 3, 4});
    CHECK(interpolate_linear(std::vector<double>{m, 5, m}) == std::vector<double>{5, 5, 5});
    const std::vector<double> full{1.5, 2.25, 7};
    CHECK(interpolate_linear(full) == full);
    CHECK_THROWS_WITH_AS(interpolate_linear(std::vector<double>{m, m}, "adclicks"),
                         doctest::Contains("adclicks"), ValidationError);

    const std::vector<double> obs{3, m, m, m, 9, 1, m, 2};
    const auto filled = interpolate_linear(obs);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (!std::isnan(obs[i])) CHECK(filled[i] == obs[i]);
    }
}

TEST_CASE("cpc derivation") {
    auto s = derive_cpc(series_of({10, 4, 12, 8, 8, 8, 8, 8, 8, 8}, {5, 0, 3, 4, 4, 4, 4, 4, 4, 4}));
    CHECK(s.cpc[0] == 2.0);
    CHECK(s.cpc[1] == 3.0);  // zero clicks: interpolated between 2 and 4
    CHECK(s.cpc[2] == 4.0);
    for (std::size_t t = 0; t < kLagWarmup; ++t) CHECK(std::isnan(s.lag7_cpc[t]));
    for (std::size_t t = kLagWarmup; t < s.size(); ++t) CHECK(s.lag7_cpc[t] == s.cpc[t - 7]);
    for (std::size_t t = 0; t < s.size(); ++t) {
        if (s.adclicks[t] > 0) CHECK(s.cpc[t] * s.adclicks[t] == doctest::Approx(s.adcost[t]));
    }
    CHECK_THROWS_AS(derive_cpc(series_of({1, 2}, {0, 0})), ValidationError);
}

TEST_CASE("monthly budget proxy") {
    // 2021-04 has 30 days, 2021-05 has 31.
    std::vector<double> cost(61, 10.0);
    for (std::size_t i = 30; i < 61; ++i) cost[i] = 20.0;
    AdvertiserSeries s = series_of(cost, std::vector<double>(61, 1.0));
    s.start = parse_date("2021-04-01");
    s = extract_budget(derive_cpc(s));
    CHECK(s.adbudget[0] == 300.0);
    CHECK(s.adbudget[29] == 300.0);
    CHECK(s.adbudget[30] == 620.0);
    CHECK(s.adbudget[60] == 620.0);
}

TEST_CASE("calendar frame") {
    const auto c = CalendarFrame::from_range(parse_date("2019-12-25"), 20);
    for (std::size_t i = 0; i + 1 < c.size(); ++i) CHECK(c.dow[i + 1] == (c.dow[i] + 1) % 7);
    CHECK(c.doy[7] == 1);  // 2020-01-01
    CHECK(c.month[7] == 1);
}

TEST_CASE("prepare_panel leaves finite non-negative cpc") {
    const PanelDataset p = prepare_panel(ingest(clean_csv(3, 120, 1)));
    for (const auto& s : p.advertisers()) {
        for (double v : s.cpc) {
            CHECK(std::isfinite(v));
            CHECK(v >= 0.0);
        }
    }
}

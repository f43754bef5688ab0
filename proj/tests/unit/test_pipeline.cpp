#include "adcast/errors.hpp"
#include "adcast/models/neural.hpp"
#include "adcast/pipeline/backtest.hpp"
#include "adcast/pipeline/compose.hpp"
#include "adcast/pipeline/metrics.hpp"
#include "adcast/rng.hpp"
#include "adcast/simgen/simgen.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

using namespace adcast;
using namespace adcast::pipeline;
using clustering::ClusterAssignment;
using clustering::ClusterMethod;

namespace {

const PanelDataset& sim_panel() {
    static const PanelDataset panel = [] {
        sim::MarketConfig mc;
        mc.n_advertisers = 14;
        mc.n_clusters = 2;
        mc.n_days = 400;
        mc.seed = 12;
        return sim::simulate(mc).panel;
    }();
    return panel;
}

/// First `big` advertisers in cluster 0, the rest in cluster 1.
ClusterAssignment split_assignment(const PanelDataset& panel, std::size_t big, ClusterMethod method) {
    ClusterAssignment a;
    a.method = method;
    a.k = 2;
    for (std::size_t i = 0; i < panel.size(); ++i) {
        a.ids.push_back(panel.advertisers()[i].advertiser_id);
        a.labels.push_back(i < big ? 0 : 1);
    }
    return a;
}

PanelDataset periodic_panel(std::size_t n, std::size_t days) {
    std::vector<AdvertiserSeries> out;
    const std::vector<double> cycle{10, 12, 9, 11, 14, 7, 8};
    for (std::size_t a = 0; a < n; ++a) {
        AdvertiserSeries s;
        s.advertiser_id = "p" + std::to_string(a);
        s.category = a % 2 ? "odd" : "even";
        s.start = parse_date("2021-01-04");
        for (std::size_t d = 0; d < days; ++d) {
            s.adcost.push_back(cycle[d % 7] * static_cast<double>(a + 1));
            s.adclicks.push_back(4.0);
            s.impressions.push_back(100.0);
        }
        out.push_back(extract_budget(derive_cpc(std::move(s))));
    }
    return PanelDataset(std::move(out));
}

using V = std::vector<double>;

DateRange history_to(const PanelDataset& p, long offset) { return {p.start(), add_days(p.start(), offset)}; }

} // namespace

TEST_CASE("metric fixtures and identities") {
    CHECK(mae(V{1}, V{3}) == 2.0);
    CHECK(smape(V{1}, V{3}) == 1.0);
    CHECK(smape(V{0}, V{0}) == 0.0);
    CHECK(mae(V{1, 2, 3}, V{1, 2, 3}) == 0.0);
    CHECK(smape(V{1, 2, 3}, V{1, 2, 3}) == 0.0);
    CHECK(mae(V{0, 0}, V{1, -3}) == 2.0);
    CHECK(smape(V{1, 0}, V{1, 5}) == doctest::Approx(1.0));  // (0 + 2) / 2
    CHECK_THROWS_AS(mae(V{1, 2}, V{1}), ValidationError);
    CHECK_THROWS_AS(smape(V{}, V{}), ValidationError);

    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = 1 + rng.index(20);
        std::vector<double> y(n), p(n);
        for (std::size_t t = 0; t < n; ++t) {
            y[t] = rng.bernoulli(0.1) ? 0.0 : rng.normal(0, 3);
            p[t] = rng.bernoulli(0.1) ? 0.0 : rng.normal(0, 3);
        }
        const double s = smape(y, p);
        CHECK(s >= 0.0);
        CHECK(s <= 2.0);
        CHECK(s == smape(p, y));
        const double c = rng.uniform(0.1, 10.0);
        std::vector<double> yc(y), pc(p);
        for (std::size_t t = 0; t < n; ++t) {
            yc[t] *= c;
            pc[t] *= c;
        }
        CHECK(smape(yc, pc) == doctest::Approx(s).epsilon(1e-12));
        CHECK(mae(yc, pc) == doctest::Approx(c * mae(y, p)).epsilon(1e-12));
    }
}

TEST_CASE("composition channel counts") {
    const auto& panel = sim_panel();
    const auto dist = split_assignment(panel, 12, ClusterMethod::distance);
    const std::string id = panel.advertisers()[0].advertiser_id;
    const auto window = history_to(panel, 300);

    const auto uni = compose(panel, id, {Composition::univar}, nullptr, window, 14);
    CHECK(uni.past_names == std::vector<std::string>{"cpc", "lag7_cpc"});
    CHECK_FALSE(uni.budget_variable().has_value());

    const auto multi = compose(panel, id, {Composition::multivar}, nullptr, window, 14);
    CHECK(multi.past.cols() == 6);
    REQUIRE(multi.budget_variable().has_value());

    const auto comp = compose(panel, id, {Composition::comp_dist, 5}, &dist, window, 14);
    CHECK(comp.past.cols() == multi.past.cols() + 6);
    CHECK(comp.past_names.back() == "cluster_mean_cpc");
    CHECK_FALSE(comp.degraded);
    CHECK(comp.known == multi.known);
    CHECK(comp.history() == multi.history());
    CHECK(comp.known.rows() == comp.history() + 14);
    // The lag-7 warm-up is skipped.
    CHECK(comp.start == add_days(panel.start(), 7));

    CHECK_THROWS_AS(compose(panel, id, {Composition::comp_dist}, nullptr, window, 14), ValidationError);
    CHECK_THROWS_AS(compose(panel, id, {Composition::comp_cat}, &dist, window, 14), ValidationError);
}

TEST_CASE("peers come from the advertiser's own cluster") {
    const auto& panel = sim_panel();
    const auto window = history_to(panel, 300);
    for (ClusterMethod m : {ClusterMethod::category, ClusterMethod::extracted, ClusterMethod::distance}) {
        const auto a = m == ClusterMethod::category ? clustering::category_clusters(panel) : split_assignment(panel, 8, m);
        for (const auto& s : panel.advertisers()) {
            const auto peers = select_peers(panel, s.advertiser_id, a, window, 5, 3);
            const auto members = a.members(a.label_of(s.advertiser_id));
            CHECK(peers.size() == std::min<std::size_t>(5, members.size() - 1));
            for (const auto& p : peers) {
                CHECK(p != s.advertiser_id);
                CHECK(std::find(members.begin(), members.end(), p) != members.end());
            }
        }
    }
}

TEST_CASE("nearest peers are nearest under DTW") {
    const auto& panel = sim_panel();
    const auto window = history_to(panel, 300);
    const auto a = split_assignment(panel, 12, ClusterMethod::distance);
    const auto id = panel.advertisers()[0].advertiser_id;
    const auto one = select_peers(panel, id, a, window, 1);
    const auto all = select_peers(panel, id, a, window, 11);
    REQUIRE(all.size() == 11);
    CHECK(one.front() == all.front());
    CHECK(std::set<std::string>(all.begin(), all.end()).size() == 11);
}

TEST_CASE("an advertiser alone in its cluster degrades to its own CPC") {
    const auto& panel = sim_panel();
    const auto a = split_assignment(panel, 13, ClusterMethod::distance);
    const auto id = panel.advertisers()[13].advertiser_id;
    const auto in = compose(panel, id, {Composition::comp_dist}, &a, history_to(panel, 300), 14);
    CHECK(in.degraded);
    REQUIRE(in.past_names.back() == "cluster_mean_cpc");
    CHECK(in.past.column(in.past.cols() - 1) == in.past.column(in.target));
}

TEST_CASE("competition with no extra channels reproduces multivar exactly") {
    const auto& panel = sim_panel();
    const auto a = split_assignment(panel, 12, ClusterMethod::distance);
    const auto id = panel.advertisers()[2].advertiser_id;
    const auto window = history_to(panel, 300);
    const auto multi = compose(panel, id, {Composition::multivar}, nullptr, window, 14);
    const auto bare = compose(panel, id, {Composition::comp_dist, 0, false}, &a, window, 14);
    CHECK(bare.past == multi.past);
    CHECK(bare.past_names == multi.past_names);
    for (models::ModelKind kind : {models::ModelKind::gbdt, models::ModelKind::lstm, models::ModelKind::tft}) {
        INFO(models::to_string(kind));
        models::ModelConfig cfg;
        cfg.kind = kind;
        cfg.horizon = 14;
        cfg.hidden = 8;
        cfg.epochs = 2;
        cfg.gbdt.rounds = 10;
        const auto fm = models::predict(models::fit(multi, cfg), multi);
        const auto fb = models::predict(models::fit(bare, cfg), bare);
        CHECK(fm.point == fb.point);
        CHECK(fm.quantile_band == fb.quantile_band);
    }
}

TEST_CASE("what-if scenarios") {
    const auto& panel = sim_panel();
    const auto id = panel.advertisers()[1].advertiser_id;
    const auto in = compose(panel, id, {Composition::multivar}, nullptr, history_to(panel, 300), 14);
    models::ModelConfig cfg;
    cfg.kind = models::ModelKind::gbdt;
    cfg.horizon = 14;
    cfg.gbdt.rounds = 20;
    const auto model = models::fit(in, cfg);

    const auto same = whatif(model, in, budget_plan(in));
    CHECK(same.delta == std::vector<double>(14, 0.0));
    CHECK(same.scenario.dates == same.baseline.dates);

    std::vector<double> doubled = budget_plan(in);
    for (double& v : doubled) v *= 2.0;
    const auto r = whatif(model, in, doubled);
    for (std::size_t h = 0; h < 14; ++h) CHECK(r.delta[h] == r.scenario.point[h] - r.baseline.point[h]);
    CHECK_THROWS_AS(whatif(model, in, std::vector<double>(13, 1.0)), ValidationError);

    const auto uni = compose(panel, id, {Composition::univar}, nullptr, history_to(panel, 300), 14);
    cfg.kind = models::ModelKind::snaive;
    CHECK_THROWS_WITH_AS(whatif(models::fit(uni, cfg), uni, doubled), "model has no budget channel", ValidationError);
}

TEST_CASE("full grid and grid files") {
    models::ModelConfig base;
    const auto grid = full_grid(base);
    CHECK(grid.size() == 16);
    std::set<std::string> tags;
    for (const auto& e : grid) tags.insert(e.tag());
    CHECK(tags.size() == 16);
    CHECK(tags.count("sarima.univar") == 1);
    CHECK(tags.count("tft.multivar.comp.dist") == 1);
    CHECK(std::count_if(grid.begin(), grid.end(), [](const GridEntry& e) { return e.model.kind == models::ModelKind::sarima; }) == 1);

    const auto back = grid_from_json(grid_to_json(grid));
    REQUIRE(back.size() == grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(back[i].tag() == grid[i].tag());
    CHECK(grid_from_json(nlohmann::json{{"full_grid", true}}).size() == 16);
    const auto custom = grid_from_json(nlohmann::json::parse(
        R"({"base": {"hidden": 4}, "entries": [{"kind": "lstm", "composition": "multivar", "epochs": 3}]})"));
    REQUIRE(custom.size() == 1);
    CHECK(custom[0].model.hidden == 4);
    CHECK(custom[0].model.epochs == 3);
    CHECK_THROWS_AS(grid_from_json(nlohmann::json::parse(R"({"entries": []})")), ValidationError);
    CHECK_THROWS_AS(grid_from_json(nlohmann::json::parse(R"({"entries": [{"composition": "bogus"}]})")), ValidationError);
}

TEST_CASE("seasonal naive backtest on a periodic panel is exact") {
    const auto panel = periodic_panel(3, 260);
    models::ModelConfig cfg;
    cfg.kind = models::ModelKind::snaive;
    BacktestOptions opt;
    opt.horizons = {14, 30, 60};
    const auto report = backtest(panel, {{cfg, {Composition::univar}}}, {}, opt);
    CHECK(report.entries.size() == 9);
    for (const auto& e : report.entries) {
        CHECK(e.smape == 0.0);
        CHECK(e.mae == 0.0);
    }
    CHECK(report.summary.size() == 3);
}

TEST_CASE("backtest summary matches its entries and respects the origin") {
    const auto& panel = sim_panel();
    models::ModelConfig cfg;
    cfg.kind = models::ModelKind::gbdt;
    cfg.gbdt.rounds = 10;
    models::ModelConfig naive;
    naive.kind = models::ModelKind::snaive;
    BacktestOptions opt;
    opt.horizons = {14, 30};
    opt.advertisers = {panel.advertisers()[0].advertiser_id, panel.advertisers()[5].advertiser_id,
                       panel.advertisers()[9].advertiser_id};
    opt.parallelism = 2;
    const std::vector<GridEntry> grid{{cfg, {Composition::multivar}}, {naive, {Composition::univar}}};
    const auto report = backtest(panel, grid, {}, opt);
    REQUIRE(report.entries.size() == 3 * 2 * 2);
    for (const auto& cell : report.summary) {
        std::vector<double> s;
        for (const auto& e : report.entries) {
            if (e.config == cell.config && e.horizon == cell.horizon) s.push_back(e.smape);
        }
        REQUIRE(s.size() == 3);
        const double m = (s[0] + s[1] + s[2]) / 3.0;
        double ss = 0.0;
        for (double v : s) ss += (v - m) * (v - m);
        CHECK(cell.smape_mean == doctest::Approx(m));
        CHECK(cell.smape_std == doctest::Approx(std::sqrt(ss / 2.0)));
    }
    CHECK(report.cell("gbdt.multivar", 30).n == 3);
    CHECK_THROWS_AS(report.cell("gbdt.multivar", 60), NotFoundError);

    // Serial and parallel runs agree.
    opt.parallelism = 1;
    const auto serial = backtest(panel, grid, {}, opt);
    for (std::size_t i = 0; i < serial.entries.size(); ++i) CHECK(serial.entries[i].smape == report.entries[i].smape);

    // Leakage guard: rewriting clicks from the origin on changes actual CPC but
    // not the forecasts. Costs stay put so the known budget plan is unchanged.
    const Date origin = default_origin(panel, opt.horizons);
    std::vector<AdvertiserSeries> altered = panel.advertisers();
    const std::size_t o = panel.offset_of(origin);
    for (auto& s : altered) {
        for (std::size_t t = o; t < s.size(); ++t) {
            s.adclicks[t] *= 3.0;
            s.impressions[t] += 1.0;
        }
        s.cpc.clear();
        s = extract_budget(derive_cpc(std::move(s)));
    }
    const PanelDataset future_changed(std::move(altered));
    for (const auto& id : opt.advertisers) {
        CHECK(actual_cpc(panel, id, origin, 14) != actual_cpc(future_changed, id, origin, 14));
        for (const auto& e : grid) {
            const auto a = job_input(panel, id, e, {}, origin, 14, 0);
            const auto b = job_input(future_changed, id, e, {}, origin, 14, 0);
            CHECK(a.past == b.past);
            CHECK(a.known == b.known);
            auto cfg14 = e.model;
            cfg14.horizon = 14;
            CHECK(models::predict(models::fit(a, cfg14), a).point == models::predict(models::fit(b, cfg14), b).point);
        }
    }

    std::ostringstream csv;
    write_summary_csv(csv, report);
    CHECK(csv.str().rfind("config,horizon,mae_mean,mae_std,smape_mean,smape_std\n", 0) == 0);
    std::ostringstream rows;
    write_backtest_csv(rows, report);
    const std::string text = rows.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 13);
}

TEST_CASE("backtest input errors") {
    const auto& panel = sim_panel();
    models::ModelConfig sarima;
    sarima.kind = models::ModelKind::sarima;
    BacktestOptions opt;
    opt.horizons = {14};
    CHECK_THROWS_WITH_AS(backtest(panel, {{sarima, {Composition::multivar}}}, {}, opt),
                         doctest::Contains("univariate"), ValidationError);
    models::ModelConfig naive;
    naive.kind = models::ModelKind::snaive;
    opt.origins = {add_days(panel.start(), 60)};
    CHECK_THROWS_WITH_AS(backtest(panel, {{naive, {Composition::univar}}}, {}, opt), doctest::Contains("short by"),
                         ValidationError);
    opt.origins = {add_days(panel.start(), 390)};
    CHECK_THROWS_WITH_AS(backtest(panel, {{naive, {Composition::univar}}}, {}, opt), doctest::Contains("short by 4"),
                         ValidationError);
    opt.origins = {};
    CHECK_THROWS_AS(backtest(panel, {{naive, {Composition::comp_dist}}}, {}, opt), ValidationError);
}

TEST_CASE("work queue") {
    std::vector<int> hit(50, 0);
    run_queue(50, 4, [&](std::size_t i) { hit[i] += 1; });
    CHECK(std::all_of(hit.begin(), hit.end(), [](int h) { return h == 1; }));
    CHECK_THROWS_AS(run_queue(10, 3,
                              [](std::size_t i) {
                                  if (i == 7) throw NumericalError("boom");
                              }),
                    NumericalError);
    run_queue(0, 2, [](std::size_t) { FAIL("no jobs expected"); });
}

TEST_CASE("robustness table layout") {
    sim::MarketConfig mc;
    mc.n_advertisers = 8;
    mc.n_clusters = 2;
    mc.seed = 4;
    mc.shock = sim::ShockConfig{parse_date("2020-03-15"), {"cat_00"}};
    const auto sim = sim::simulate(mc);
    const auto w = sim::shock_windows(mc);
    const std::vector<NamedWindow> windows{{"pre", w.pre}, {"post1", w.post1}, {"post2", w.post2}};
    clustering::ClusteringOptions co;
    co.k = 2;
    ClusterSet clusters{{ClusterMethod::distance,
                         clustering::distance_clusters(sim.panel, {sim.panel.start(), w.pre.first}, co)}};
    RobustnessOptions opt;
    opt.model.kind = models::ModelKind::snaive;
    const auto table = robustness_experiment(sim.panel, {"cat_00"}, windows, clusters, opt);
    CHECK(table.windows == std::vector<std::string>{"pre", "post1", "post2"});
    CHECK(table.configs == std::vector<std::string>{"snaive.multivar", "snaive.multivar.comp.dist"});
    CHECK(table.cells.size() == 6);
    CHECK(!table.advertisers.empty());
    for (const auto& id : table.advertisers) CHECK(sim.panel.at(id).category == "cat_00");
    CHECK(table.cell("post1", "snaive.multivar").n == table.advertisers.size());
    std::ostringstream csv;
    write_robustness_csv(csv, table);
    const std::string text = csv.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 7);
    CHECK_THROWS_AS(robustness_experiment(sim.panel, {"no_such_category"}, windows, clusters, opt), ValidationError);
}

#include "adcast/errors.hpp"
#include "adcast/service/api.hpp"
#include "adcast/service/cli.hpp"
#include "adcast/service/run_store.hpp"
#include "adcast/service/server.hpp"
#include "support/json_schema.hpp"

#include <doctest.h>
#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>
#include <unistd.h>

using namespace adcast;
using namespace adcast::service;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("adcast_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p.parent_path());
    return p;
}

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

CliResult cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

void write_json(const fs::path& path, const json& j) { std::ofstream(path) << j.dump(2); }

const json& run_config() {
    static const json cfg = json::parse(R"({
        "seed": 5,
        "horizons": [14],
        "encoder_length": 30,
        "clustering": {"k_min": 2, "k_max": 3},
        "robustness_model": {"kind": "snaive"},
        "simulation": {"n_advertisers": 6, "n_clusters": 2, "n_days": 620,
                       "shock": {"date": "2019-12-01", "affected_categories": ["cat_00"]}}
    })");
    return cfg;
}

/// A run taken through simulate, cluster, train and backtest once for all service tests.
const fs::path& trained_run() {
    static const fs::path run = [] {
        const fs::path dir = scratch("trained");
        const fs::path cfg = dir.string() + ".config.json";
        const fs::path grid = dir.string() + ".grid.json";
        write_json(cfg, run_config());
        write_json(grid, json::parse(R"({"base": {"hidden": 8, "epochs": 2, "gbdt": {"rounds": 10}}, "entries": [
            {"kind": "snaive", "composition": "univar"},
            {"kind": "gbdt", "composition": "multivar"},
            {"kind": "tft", "composition": "multivar.comp.dist"}]})"));
        for (const auto& args : std::vector<std::vector<std::string>>{
                 {"simulate", "--config", cfg.string(), "--out", dir.string()},
                 {"cluster", "--run", dir.string(), "--method", "dist"},
                 {"train", "--run", dir.string(), "--grid", grid.string()},
                 {"backtest", "--run", dir.string()}}) {
            const auto r = cli(args);
            if (r.code != 0) throw std::runtime_error(args[0] + " failed: " + r.err);
        }
        return dir;
    }();
    return run;
}

const Service& shared_service() {
    static const Service s(RunStore::open(trained_run()));
    return s;
}

testing::SchemaChecker schema(const std::string& name) {
    return testing::SchemaChecker(
        json::parse(read_file(fs::path(ADCAST_SOURCE_DIR) / "schemas" / (name + ".schema.json"))));
}

void check_schema(const std::string& name, const json& doc) {
    const auto errors = schema(name).errors(doc);
    for (const auto& e : errors) FAIL_CHECK(name << ": " << e);
    CHECK(errors.empty());
}

json forecast_request(const std::string& tag, const std::string& advertiser = "adv_000") {
    return {{"advertiser_id", advertiser}, {"config_tag", tag}, {"horizon", 14}};
}

ApiResponse post_forecast(const json& request) { return shared_service().handle("POST", "/forecast", request.dump()); }

} // namespace

TEST_CASE("schema checker rejects what the schemas forbid") {
    const auto error = schema("error");
    CHECK(error.errors(json{{"status", 404}, {"error", "x"}}).empty());
    CHECK(error.errors(json{{"status", 200}, {"error", "x"}}).size() == 1);
    CHECK(error.errors(json{{"status", 404}}).size() == 1);
    CHECK(error.errors(json{{"status", 404}, {"error", "x"}, {"extra", 1}}).size() == 1);
    CHECK(error.errors(json{{"status", "404"}, {"error", "x"}}).size() == 1);
    const auto request = schema("forecast_request");
    json plan = forecast_request("tft.multivar");
    plan["budget_plan"] = {{{"date", "2021-02-30"}, {"amount", -1}}};
    CHECK(request.errors(plan).size() == 2);
    plan["budget_plan"] = json::array();
    CHECK(request.errors(plan).size() == 1);
}

TEST_CASE("fingerprint is 64-bit FNV-1a") {
    CHECK(fingerprint("") == "cbf29ce484222325");
    CHECK(fingerprint("a") == "af63dc4c8601ec8c");
    CHECK(fingerprint("foobar") == "85944171f73967e8");
}

TEST_CASE("run config JSON") {
    const auto cfg = run_config().get<RunConfig>();
    CHECK(cfg.seed == 5);
    CHECK(cfg.horizons == std::vector<std::size_t>{14});
    REQUIRE(cfg.simulation.has_value());
    CHECK(cfg.simulation->n_days == 620);
    const auto back = json(cfg).get<RunConfig>();
    CHECK(json(back) == json(cfg));
    CHECK_THROWS_AS(json::parse(R"({"seeds": 1})").get<RunConfig>(), ValidationError);
    CHECK_THROWS_AS(json::parse(R"({"horizons": []})").get<RunConfig>().validate(), ValidationError);
    CHECK_THROWS_AS(json::parse(R"({"horizons": "14"})").get<RunConfig>(), ValidationError);
}

TEST_CASE("run store round trip and tamper detection") {
    sim::MarketConfig mc;
    mc.n_advertisers = 3;
    mc.n_clusters = 1;
    mc.n_days = 200;
    const auto sim = sim::simulate(mc);
    const fs::path dir = scratch("store");
    RunConfig cfg;
    cfg.simulation = mc;
    const auto created = RunStore::create(dir, cfg, sim.panel, sim.truth);
    for (const char* f : {"manifest.json", "config.json", "dataset.csv", "ground_truth.json"}) CHECK(fs::exists(dir / f));
    const json manifest = json::parse(read_file(dir / "manifest.json"));
    for (const char* k : {"run_id", "config_hash", "dataset_fingerprint", "created_at"}) CHECK(manifest.contains(k));

    const auto opened = RunStore::open(dir);
    CHECK(opened.run_id() == created.run_id());
    CHECK(opened.panel() == sim.panel);
    CHECK(opened.truth().has_value());
    CHECK(opened.origin() == add_days(sim.panel.start(), 200 - 60));
    CHECK(opened.training_window().last == opened.origin());
    CHECK(opened.clusters().empty());
    CHECK(opened.model_index().empty());
    CHECK_THROWS_WITH_AS(opened.grid(), "no trained models", ValidationError);
    CHECK_THROWS_AS(opened.load_bundle("adv_000", "tft.multivar"), NotFoundError);
    CHECK_THROWS_AS(opened.model_path("../etc", "tft.multivar"), ValidationError);
    CHECK_THROWS_AS(opened.model_path("adv_000", "a/b"), ValidationError);

    CHECK_THROWS_AS(RunStore::create(dir, cfg, sim.panel), ValidationError);
    CHECK_THROWS_AS(RunStore::open(dir / "missing"), NotFoundError);

    std::string csv = read_file(dir / "dataset.csv");
    csv[csv.size() - 2] = csv[csv.size() - 2] == '1' ? '2' : '1';
    write_file(dir / "dataset.csv", csv);
    CHECK_THROWS_WITH_AS(RunStore::open(dir), doctest::Contains("dataset.csv"), ValidationError);
}

TEST_CASE("CLI exit codes") {
    CHECK(cli({}).code == 1);
    CHECK(cli({"--help"}).code == 0);
    CHECK(cli({"simulate", "--bogus"}).code == 1);
    CHECK(cli({"cluster", "--run", "/nonexistent/run", "--method", "dist"}).code == 1);

    const fs::path dir = scratch("fresh");
    const fs::path cfg = dir.string() + ".config.json";
    write_json(cfg, json::parse(R"({"simulation": {"n_advertisers": 4, "n_days": 300}, "clustering": {"k_max": 3}})"));
    REQUIRE(cli({"simulate", "--config", cfg.string(), "--out", dir.string(), "--seed", "9"}).code == 0);
    CHECK(RunStore::open(dir).config().seed == 9);
    CHECK(RunStore::open(dir).config().simulation->seed == 9);

    const auto bt = cli({"backtest", "--run", dir.string()});
    CHECK(bt.code == 1);
    CHECK(bt.err.find("no trained models") != std::string::npos);
    CHECK(cli({"cluster", "--run", dir.string(), "--method", "nope"}).code == 1);
    CHECK(cli({"robustness", "--run", dir.string()}).code == 1);  // no shock configured
    CHECK(cli({"backtest", "--run", dir.string(), "--horizons", "14,x"}).code == 1);

    REQUIRE(cli({"cluster", "--run", dir.string(), "--method", "dist"}).code == 0);
    const json clusters = json::parse(read_file(dir / "clusters.json"));
    CHECK(clusters.contains("distance"));
    REQUIRE(cli({"cluster", "--run", dir.string(), "--method", "cat"}).code == 0);
    CHECK(json::parse(read_file(dir / "clusters.json")).contains("category"));
    CHECK(json::parse(read_file(dir / "clusters.json")).contains("distance"));

    const fs::path grid = dir.string() + ".grid.json";
    write_json(grid, json::parse(R"({"entries": [{"kind": "sarima", "composition": "multivar"}]})"));
    CHECK(cli({"train", "--run", dir.string(), "--grid", grid.string()}).code == 1);
    write_json(grid, json::parse(R"({"entries": [{"kind": "gbdt", "composition": "multivar.comp.extr"}]})"));
    const auto missing = cli({"train", "--run", dir.string(), "--grid", grid.string()});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("extracted") != std::string::npos);
}

TEST_CASE("trained run artifacts") {
    const auto& dir = trained_run();
    const auto store = RunStore::open(dir);
    const auto index = store.model_index();
    CHECK(index.size() == 6);
    for (const auto& [id, tags] : index) CHECK(tags.size() == 3);
    CHECK(store.grid().size() == 3);
    const auto bundle = store.load_bundle("adv_001", "tft.multivar.comp.dist");
    CHECK(bundle.origin == store.origin());
    CHECK(bundle.models.count(14) == 1);

    const std::string summary = read_file(dir / "reports" / "summary.csv");
    CHECK(summary.rfind("config,horizon,mae_mean,mae_std,smape_mean,smape_std\n", 0) == 0);
    CHECK(std::count(summary.begin(), summary.end(), '\n') == 4);
    const std::string rows = read_file(dir / "reports" / "backtest.csv");
    CHECK(rows.rfind("config,horizon,advertiser,origin,mae,smape\n", 0) == 0);
    CHECK(std::count(rows.begin(), rows.end(), '\n') == 1 + 6 * 3);

    const auto r = cli({"robustness", "--run", dir.string()});
    REQUIRE(r.code == 0);
    const std::string table = read_file(dir / "reports" / "robustness.csv");
    CHECK(table.rfind("window,config,n,smape_mean,smape_std\n", 0) == 0);
    CHECK(std::count(table.begin(), table.end(), '\n') == 7);

    const fs::path plan = dir.string() + ".plan.json";
    write_json(plan, json(std::vector<double>(14, 5000.0)));
    const auto w = cli({"whatif", "--run", dir.string(), "--advertiser", "adv_002", "--plan", plan.string(),
                        "--config-tag", "gbdt.multivar"});
    REQUIRE(w.code == 0);
    const json response = json::parse(w.out);
    CHECK(response.at("delta").size() == 14);
    check_schema("forecast_response", response);
    CHECK(cli({"whatif", "--run", dir.string(), "--advertiser", "adv_002", "--plan", plan.string(), "--config-tag",
               "snaive.univar"})
              .code == 1);
    CHECK(cli({"whatif", "--run", dir.string(), "--advertiser", "nobody", "--plan", plan.string()}).code == 1);
}

TEST_CASE("read endpoints match their schemas") {
    const auto& s = shared_service();
    const auto adv = s.handle("GET", "/advertisers", "");
    REQUIRE(adv.status == 200);
    check_schema("advertisers", adv.body);
    CHECK(adv.body.at("advertisers").size() == 6);
    CHECK(adv.body.at("advertisers")[0].at("config_tags").size() == 3);

    const auto hist = s.handle("GET", "/advertisers/adv_003/history", "");
    REQUIRE(hist.status == 200);
    check_schema("history", hist.body);
    CHECK(hist.body.at("cpc").size() == 620);
    CHECK(hist.body.at("dates").size() == 620);

    const auto cl = s.handle("GET", "/clusters", "");
    REQUIRE(cl.status == 200);
    check_schema("clusters", cl.body);
    CHECK(cl.body.at("methods").contains("distance"));

    const auto report = s.handle("GET", "/reports/backtest", "");
    REQUIRE(report.status == 200);
    check_schema("backtest_report", report.body);

    for (const auto& [method, path] : std::vector<std::pair<std::string, std::string>>{
             {"GET", "/advertisers/nobody/history"}, {"GET", "/nothing"}, {"DELETE", "/advertisers"}}) {
        const auto r = s.handle(method, path, "");
        CHECK(r.status == 404);
        check_schema("error", r.body);
    }
}

TEST_CASE("forecast endpoint") {
    check_schema("forecast_request", forecast_request("tft.multivar.comp.dist"));

    SUBCASE("baseline only") {
        const auto r = post_forecast(forecast_request("tft.multivar.comp.dist"));
        REQUIRE(r.status == 200);
        check_schema("forecast_response", r.body);
        CHECK_FALSE(r.body.contains("delta"));
        CHECK_FALSE(r.body.contains("scenario"));
        CHECK(r.body.at("stored_plan").size() == 14);
        const auto& f = r.body.at("forecast");
        CHECK(f.at("point").size() == 14);
        CHECK(f.at("attention").size() == 30);
        CHECK(f.at("dates").front() == r.body.at("origin"));
        const auto univar = post_forecast(forecast_request("snaive.univar"));
        REQUIRE(univar.status == 200);
        CHECK_FALSE(univar.body.contains("stored_plan"));
    }
    SUBCASE("stored plan gives a zero delta") {
        const auto base = post_forecast(forecast_request("gbdt.multivar"));
        REQUIRE(base.status == 200);
        json request = forecast_request("gbdt.multivar");
        const Date origin = parse_date(base.body.at("origin").get<std::string>());
        for (std::size_t h = 0; h < 14; ++h) {
            request["budget_plan"].push_back({{"date", format_date(add_days(origin, static_cast<long>(h)))},
                                              {"amount", base.body.at("stored_plan")[h]}});
        }
        check_schema("forecast_request", request);
        const auto r = post_forecast(request);
        REQUIRE(r.status == 200);
        check_schema("forecast_response", r.body);
        CHECK(r.body.at("delta") == json(std::vector<double>(14, 0.0)));
        CHECK(r.body.at("scenario").at("point") == base.body.at("forecast").at("point"));
    }
    SUBCASE("partial plan keeps the remaining stored days") {
        const auto base = post_forecast(forecast_request("tft.multivar.comp.dist"));
        json request = forecast_request("tft.multivar.comp.dist");
        request["budget_plan"] = {{{"date", base.body.at("origin")}, {"amount", 1e6}}};
        const auto r = post_forecast(request);
        REQUIRE(r.status == 200);
        CHECK(r.body.at("delta").size() == 14);
    }
    SUBCASE("errors") {
        auto expect = [](const json& request, int status, const std::string& fragment) {
            const auto r = post_forecast(request);
            CHECK(r.status == status);
            check_schema("error", r.body);
            CHECK(r.body.at("error").get<std::string>().find(fragment) != std::string::npos);
        };
        expect(forecast_request("tft.multivar.comp.dist", "nobody"), 404, "unknown advertiser");
        expect(forecast_request("lstm.multivar"), 404, "no trained model");
        json wrong_h = forecast_request("gbdt.multivar");
        wrong_h["horizon"] = 30;
        expect(wrong_h, 422, "not trained");
        expect(json{{"advertiser_id", "adv_000"}}, 422, "forecast request");

        const std::string origin = post_forecast(forecast_request("gbdt.multivar")).body.at("origin");
        const std::string next = format_date(add_days(parse_date(origin), 1));
        const std::string later = format_date(add_days(parse_date(origin), 5));
        const std::string beyond = format_date(add_days(parse_date(origin), 14));
        json plan = forecast_request("snaive.univar");
        plan["budget_plan"] = {{{"date", origin}, {"amount", 1.0}}};
        expect(plan, 422, "model has no budget channel");
        plan["config_tag"] = "gbdt.multivar";
        plan["budget_plan"] = {{{"date", beyond}, {"amount", 1.0}}};
        expect(plan, 422, "outside the forecast horizon");
        plan["budget_plan"] = {{{"date", origin}, {"amount", -1.0}}};
        expect(plan, 422, "non-negative");
        plan["budget_plan"] = {{{"date", next}, {"amount", 1.0}}, {{"date", later}, {"amount", 1.0}}};
        expect(plan, 422, "contiguous");
        plan["budget_plan"] = json::array();
        expect(plan, 422, "non-empty");

        const auto bad = shared_service().handle("POST", "/forecast", "{not json");
        CHECK(bad.status == 400);
        check_schema("error", bad.body);
    }
}

TEST_CASE("concurrent forecasts agree") {
    const auto expected = post_forecast(forecast_request("tft.multivar.comp.dist", "adv_004")).body;
    std::vector<std::thread> threads;
    std::atomic<int> mismatches{0};
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&] {
            for (int i = 0; i < 3; ++i) {
                if (post_forecast(forecast_request("tft.multivar.comp.dist", "adv_004")).body != expected) ++mismatches;
            }
        });
    }
    for (auto& t : threads) t.join();
    CHECK(mismatches == 0);
}

TEST_CASE("HTTP round trip") {
    HttpServer server(shared_service());
    const int port = server.bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    std::thread serving([&] { server.listen(); });

    httplib::Client client("127.0.0.1", port);
    const auto adv = client.Get("/advertisers");
    REQUIRE(adv);
    CHECK(adv->status == 200);
    CHECK(adv->get_header_value("Content-Type").find("application/json") != std::string::npos);
    check_schema("advertisers", json::parse(adv->body));

    const auto fc = client.Post("/forecast", forecast_request("gbdt.multivar").dump(), "application/json");
    REQUIRE(fc);
    CHECK(fc->status == 200);
    check_schema("forecast_response", json::parse(fc->body));

    const auto bad = client.Post("/forecast", "[", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    const auto missing = client.Get("/advertisers/nobody/history");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    check_schema("error", json::parse(missing->body));

    server.stop();
    serving.join();
}

#include "adcast/service/cli.hpp"

#include "adcast/errors.hpp"
#include "adcast/service/api.hpp"
#include "adcast/service/server.hpp"
#include "adcast/service/workflow.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace adcast::service {

namespace {

nlohmann::json read_json_file(const std::string& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("malformed JSON in " + path + ": " + e.what());
    }
}

RunConfig load_config(const std::string& path) {
    if (path.empty()) return RunConfig{};
    return read_json_file(path).get<RunConfig>();
}

std::vector<std::size_t> parse_horizons(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(item, &pos);
        } catch (const std::exception&) {
            pos = std::string::npos;
        }
        if (pos != item.size() || v == 0) throw ValidationError("invalid horizon \"" + item + "\"");
        out.push_back(v);
    }
    if (out.empty()) throw ValidationError("no horizons given");
    return out;
}

/// Accepts {"budget_plan": [...]}, a list of {date, amount} or a list of daily amounts starting at the origin.
nlohmann::json plan_entries(const nlohmann::json& plan, Date origin) {
    const nlohmann::json& list = plan.is_object() && plan.contains("budget_plan") ? plan.at("budget_plan") : plan;
    if (!list.is_array()) throw ValidationError("plan must be a list of {date, amount} or of daily amounts");
    auto out = nlohmann::json::array();
    for (std::size_t i = 0; i < list.size(); ++i) {
        if (list[i].is_number()) {
            out.push_back({{"date", format_date(add_days(origin, static_cast<long>(i)))}, {"amount", list[i]}});
        } else {
            out.push_back(list[i]);
        }
    }
    return out;
}

HttpServer* g_server = nullptr;

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Cost-per-click forecasting and budget scenario planning", "adcast"};
    app.require_subcommand(1);

    std::string config_path, out_dir, csv_path, run_dir, method, grid_path, horizons_text, advertiser, plan_path,
        config_tag = "tft.multivar", host = "127.0.0.1";
    std::optional<std::uint64_t> seed;
    std::size_t horizon = 0;
    int port = 8080;

    auto* simulate = app.add_subcommand("simulate", "Simulate an advertiser panel into a new run directory");
    simulate->add_option("--config", config_path, "Run config JSON (market settings under \"simulation\")");
    simulate->add_option("--out", out_dir, "Run directory to create")->required();
    simulate->add_option("--seed", seed, "Overrides the run and market seed");

    auto* ingest = app.add_subcommand("ingest", "Ingest a panel CSV into a new run directory");
    ingest->add_option("--csv", csv_path, "Panel CSV")->required();
    ingest->add_option("--out", out_dir, "Run directory to create")->required();
    ingest->add_option("--config", config_path, "Run config JSON");

    auto* cluster = app.add_subcommand("cluster", "Cluster advertisers on the training window");
    cluster->add_option("--run", run_dir, "Run directory")->required();
    cluster->add_option("--method", method, "cat, extr or dist")->required();

    auto* train = app.add_subcommand("train", "Train every grid configuration for every advertiser");
    train->add_option("--run", run_dir, "Run directory")->required();
    train->add_option("--grid", grid_path, "Grid JSON")->required();

    auto* backtest = app.add_subcommand("backtest", "Score trained models after the origin");
    backtest->add_option("--run", run_dir, "Run directory")->required();
    backtest->add_option("--horizons", horizons_text, "Comma-separated horizons (default: all trained)");

    auto* robustness = app.add_subcommand("robustness", "Shock-window comparison of multivar and comp.dist");
    robustness->add_option("--run", run_dir, "Run directory")->required();

    auto* whatif = app.add_subcommand("whatif", "Forecast under a budget plan");
    whatif->add_option("--run", run_dir, "Run directory")->required();
    whatif->add_option("--advertiser", advertiser, "Advertiser id")->required();
    whatif->add_option("--plan", plan_path, "Budget plan JSON")->required();
    whatif->add_option("--config-tag", config_tag, "Trained configuration")->capture_default_str();
    whatif->add_option("--horizon", horizon, "Trained horizon (default: the shortest)");

    auto* serve = app.add_subcommand("serve", "Serve the run over HTTP");
    serve->add_option("--run", run_dir, "Run directory")->required();
    serve->add_option("--port", port, "Port")->capture_default_str();
    serve->add_option("--host", host, "Interface to bind")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*simulate) {
            RunConfig cfg = load_config(config_path);
            sim::MarketConfig market = cfg.simulation.value_or(sim::MarketConfig{});
            if (!cfg.simulation) market.seed = cfg.seed;
            if (seed) {
                cfg.seed = *seed;
                market.seed = *seed;
            }
            cfg.clustering.seed = cfg.seed;
            cfg.simulation = market;
            auto result = sim::simulate(market);
            const auto store = RunStore::create(out_dir, cfg, result.panel, result.truth);
            out << "simulated " << store.panel().size() << " advertisers over " << store.panel().n_days()
                << " days into " << out_dir << "\n";
        } else if (*ingest) {
            const RunConfig cfg = load_config(config_path);
            std::ifstream in(csv_path);
            if (!in) throw ValidationError("cannot read " + csv_path);
            const auto panel = prepare_panel(ingest_csv(in));
            const auto store = RunStore::create(out_dir, cfg, panel);
            out << "ingested " << store.panel().size() << " advertisers into " << out_dir << "\n";
        } else if (*cluster) {
            const auto store = RunStore::open(run_dir);
            const auto m = clustering::parse_cluster_method(method);
            const auto a = clustering::cluster_panel(store.panel(), m, store.training_window(), store.config().clustering);
            store.save_clusters(a);
            out << clustering::to_string(m) << " clustering: k = " << a.k << "\n";
        } else if (*train) {
            const auto store = RunStore::open(run_dir);
            const auto grid = pipeline::grid_from_json(read_json_file(grid_path));
            const auto n = train_run(store, grid);
            out << "trained " << n << " models (" << grid.size() << " configurations)\n";
        } else if (*backtest) {
            const auto store = RunStore::open(run_dir);
            const auto hs = horizons_text.empty() ? store.config().horizons : parse_horizons(horizons_text);
            const auto report = backtest_run(store, hs);
            write_backtest_reports(store, report);
            out << std::left << std::setw(28) << "config" << std::setw(9) << "horizon" << std::setw(10) << "mae"
                << "smape\n";
            for (const auto& c : report.summary) {
                out << std::left << std::setw(28) << c.config << std::setw(9) << c.horizon << std::fixed
                    << std::setprecision(4) << std::setw(10) << c.mae_mean << c.smape_mean << "\n";
            }
        } else if (*robustness) {
            const auto store = RunStore::open(run_dir);
            const auto table = robustness_run(store);
            for (const auto& c : table.cells) {
                out << std::left << std::setw(8) << c.window << std::setw(28) << c.config << std::fixed
                    << std::setprecision(4) << c.smape_mean << " +/- " << c.smape_std << "\n";
            }
        } else if (*whatif) {
            const Service service(RunStore::open(run_dir));
            const auto bundle = service.bundle(advertiser, config_tag);
            if (horizon == 0) horizon = bundle->models.begin()->first;
            const nlohmann::json request = {{"advertiser_id", advertiser},
                                            {"config_tag", config_tag},
                                            {"horizon", horizon},
                                            {"budget_plan", plan_entries(read_json_file(plan_path), bundle->origin)}};
            out << service.forecast(request).dump(2) << "\n";
        } else if (*serve) {
            const Service service(RunStore::open(run_dir));
            HttpServer server(service);
            const int bound = server.bind(host, port);
            out << "serving " << run_dir << " on http://" << host << ":" << bound << "\n" << std::flush;
            g_server = &server;
            std::signal(SIGINT, [](int) {
                if (g_server) g_server->stop();
            });
            server.listen();
            g_server = nullptr;
        }
        return 0;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const NotFoundError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace adcast::service

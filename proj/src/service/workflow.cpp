#include "adcast/service/workflow.hpp"

#include "adcast/errors.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <sstream>

namespace adcast::service {

using pipeline::GridEntry;

namespace {

void check_grid(const std::vector<GridEntry>& grid) {
    if (grid.empty()) throw ValidationError("grid has no entries");
    std::set<std::string> tags;
    for (const auto& e : grid) {
        if (e.model.kind == models::ModelKind::sarima && e.composition.tag != pipeline::Composition::univar) {
            throw ValidationError("sarima is univariate only; got composition " + pipeline::to_string(e.composition.tag));
        }
        if (!tags.insert(e.tag()).second) throw ValidationError("grid lists " + e.tag() + " twice");
        e.model.validate();
    }
}

} // namespace

std::size_t train_run(const RunStore& store, const std::vector<GridEntry>& grid) {
    check_grid(grid);
    const auto& cfg = store.config();
    const auto& panel = store.panel();
    const Date origin = store.origin();
    for (auto h : cfg.horizons) pipeline::check_span(panel, origin, h, cfg.encoder_length);
    const auto clusters = store.clusters();

    struct Job {
        std::size_t advertiser, entry, horizon;
    };
    std::vector<Job> jobs;
    for (std::size_t a = 0; a < panel.size(); ++a) {
        for (std::size_t e = 0; e < grid.size(); ++e) {
            for (auto h : cfg.horizons) jobs.push_back({a, e, h});
        }
    }
    // Fail on missing clusters before spending time on training.
    for (const auto& e : grid) {
        if (pipeline::is_competition(e.composition.tag) && !clusters.count(pipeline::required_method(e.composition.tag))) {
            throw ValidationError(pipeline::to_string(e.composition.tag) + " needs " +
                                  clustering::to_string(pipeline::required_method(e.composition.tag)) +
                                  " clusters; run the cluster command first");
        }
    }
    std::vector<models::TrainedModel> fitted(jobs.size());
    pipeline::run_queue(jobs.size(), cfg.parallelism, [&](std::size_t i) {
        const Job& j = jobs[i];
        const auto& id = panel.advertisers()[j.advertiser].advertiser_id;
        models::ModelConfig mc = grid[j.entry].model;
        mc.horizon = j.horizon;
        mc.encoder_length = cfg.encoder_length;
        const auto input = pipeline::job_input(panel, id, grid[j.entry], clusters, origin, j.horizon, cfg.seed);
        fitted[i] = models::fit(input, mc);
    });

    std::size_t i = 0;
    for (std::size_t a = 0; a < panel.size(); ++a) {
        for (const auto& e : grid) {
            ModelBundle b;
            b.advertiser_id = panel.advertisers()[a].advertiser_id;
            b.config_tag = e.tag();
            b.composition = e.composition;
            b.origin = origin;
            for (auto h : cfg.horizons) b.models[h] = std::move(fitted[i++]);
            store.save_bundle(b);
        }
    }
    store.save_grid(grid);
    return jobs.size();
}

pipeline::BacktestReport backtest_run(const RunStore& store, const std::vector<std::size_t>& horizons) {
    const auto start = std::chrono::steady_clock::now();
    if (store.model_index().empty()) throw ValidationError("no trained models");
    const auto grid = store.grid();
    if (horizons.empty()) throw ValidationError("no horizons given");
    const auto& cfg = store.config();
    for (auto h : horizons) {
        if (std::find(cfg.horizons.begin(), cfg.horizons.end(), h) == cfg.horizons.end()) {
            throw ValidationError("horizon " + std::to_string(h) + " was not trained");
        }
    }
    const auto& panel = store.panel();
    const auto clusters = store.clusters();

    struct Job {
        std::size_t advertiser, entry, horizon;
    };
    std::vector<Job> jobs;
    for (std::size_t a = 0; a < panel.size(); ++a) {
        for (std::size_t e = 0; e < grid.size(); ++e) {
            for (auto h : horizons) jobs.push_back({a, e, h});
        }
    }
    std::vector<pipeline::BacktestEntry> entries(jobs.size());
    pipeline::run_queue(jobs.size(), cfg.parallelism, [&](std::size_t i) {
        const Job& j = jobs[i];
        const auto& id = panel.advertisers()[j.advertiser].advertiser_id;
        const auto bundle = store.load_bundle(id, grid[j.entry].tag());
        const auto& model = bundle.at(j.horizon);
        const GridEntry entry{model.config, bundle.composition};
        const auto input = pipeline::job_input(panel, id, entry, clusters, bundle.origin, j.horizon, cfg.seed);
        const auto forecast = models::predict(model, input);
        const auto m = pipeline::score(pipeline::actual_cpc(panel, id, bundle.origin, j.horizon), forecast.point);
        entries[i] = {entry.tag(), j.horizon, id, bundle.origin, m.mae, m.smape, input.degraded};
    });
    pipeline::BacktestReport report;
    report.entries = std::move(entries);
    std::vector<std::string> order;
    for (const auto& e : grid) order.push_back(e.tag());
    report.summary = pipeline::summarize(report.entries, order);
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

nlohmann::json report_to_json(const pipeline::BacktestReport& report) {
    auto entries = nlohmann::json::array();
    for (const auto& e : report.entries) {
        entries.push_back({{"config", e.config},
                           {"horizon", e.horizon},
                           {"advertiser", e.advertiser},
                           {"origin", format_date(e.origin)},
                           {"mae", e.mae},
                           {"smape", e.smape},
                           {"degraded", e.degraded}});
    }
    auto summary = nlohmann::json::array();
    for (const auto& c : report.summary) {
        summary.push_back({{"config", c.config},
                           {"horizon", c.horizon},
                           {"n", c.n},
                           {"mae_mean", c.mae_mean},
                           {"mae_std", c.mae_std},
                           {"smape_mean", c.smape_mean},
                           {"smape_std", c.smape_std}});
    }
    return {{"entries", entries}, {"summary", summary}, {"seconds", report.seconds}};
}

void write_backtest_reports(const RunStore& store, const pipeline::BacktestReport& report) {
    std::ostringstream backtest, summary;
    pipeline::write_backtest_csv(backtest, report);
    pipeline::write_summary_csv(summary, report);
    write_file(store.reports_dir() / "backtest.csv", backtest.str());
    write_file(store.reports_dir() / "summary.csv", summary.str());
    write_file(store.reports_dir() / "backtest.json", report_to_json(report).dump(2) + "\n");
}

pipeline::RobustnessTable robustness_run(const RunStore& store) {
    const auto& cfg = store.config();
    if (!cfg.simulation || !cfg.simulation->shock) {
        throw ValidationError("robustness needs a simulated run with a shock configured");
    }
    const auto w = sim::shock_windows(*cfg.simulation);
    const std::vector<pipeline::NamedWindow> windows{{"pre", w.pre}, {"post1", w.post1}, {"post2", w.post2}};
    pipeline::RobustnessOptions options;
    options.model = cfg.robustness_model;
    options.model.encoder_length = cfg.encoder_length;
    options.parallelism = cfg.parallelism;
    options.seed = cfg.seed;
    const auto table = pipeline::robustness_experiment(store.panel(), cfg.simulation->shock->affected_categories, windows,
                                                       store.clusters(), options);
    std::ostringstream csv;
    pipeline::write_robustness_csv(csv, table);
    write_file(store.reports_dir() / "robustness.csv", csv.str());
    return table;
}

} // namespace adcast::service

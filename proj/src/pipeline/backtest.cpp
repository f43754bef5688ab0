#include "adcast/pipeline/backtest.hpp"

#include "adcast/errors.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

namespace adcast::pipeline {

using clustering::ClusterMethod;
using models::ModelKind;

std::string GridEntry::tag() const { return models::to_string(model.kind) + "." + to_string(composition.tag); }

std::vector<GridEntry> full_grid(const models::ModelConfig& base) {
    std::vector<GridEntry> grid;
    GridEntry sarima{base, {Composition::univar}};
    sarima.model.kind = ModelKind::sarima;
    grid.push_back(sarima);
    for (ModelKind k : {ModelKind::gbdt, ModelKind::lstm, ModelKind::tft}) {
        for (Composition c : {Composition::univar, Composition::multivar, Composition::comp_cat, Composition::comp_extr,
                              Composition::comp_dist}) {
            GridEntry e{base, {c}};
            e.model.kind = k;
            grid.push_back(e);
        }
    }
    return grid;
}

std::vector<GridEntry> grid_from_json(const nlohmann::json& j) {
    try {
        const nlohmann::json base_json = j.value("base", nlohmann::json::object());
        if (j.value("full_grid", false)) {
            auto grid = full_grid(base_json.get<models::ModelConfig>());
            const std::size_t peers = j.value("peer_limit", std::size_t{5});
            for (auto& e : grid) e.composition.peer_limit = peers;
            return grid;
        }
        std::vector<GridEntry> grid;
        for (const auto& item : j.at("entries")) {
            nlohmann::json cfg = base_json;
            for (const auto& [key, value] : item.items()) {
                if (key != "composition" && key != "peer_limit" && key != "cluster_mean") cfg[key] = value;
            }
            GridEntry e;
            e.model = cfg.get<models::ModelConfig>();
            e.composition.tag = parse_composition(item.value("composition", std::string("univar")));
            e.composition.peer_limit = item.value("peer_limit", std::size_t{5});
            e.composition.cluster_mean = item.value("cluster_mean", true);
            grid.push_back(e);
        }
        if (grid.empty()) throw ValidationError("grid has no entries");
        return grid;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("invalid grid file: ") + e.what());
    }
}

nlohmann::json grid_to_json(const std::vector<GridEntry>& grid) {
    auto entries = nlohmann::json::array();
    for (const auto& e : grid) {
        nlohmann::json item = e.model;
        item["composition"] = to_string(e.composition.tag);
        item["peer_limit"] = e.composition.peer_limit;
        item["cluster_mean"] = e.composition.cluster_mean;
        entries.push_back(item);
    }
    return {{"entries", entries}};
}

const BacktestCell& BacktestReport::cell(const std::string& config, std::size_t horizon) const {
    for (const auto& c : summary) {
        if (c.config == config && c.horizon == horizon) return c;
    }
    throw NotFoundError("no backtest cell for " + config + " at horizon " + std::to_string(horizon));
}

namespace {

std::pair<double, double> mean_sd(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    if (v.size() < 2) return {m, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

} // namespace

std::vector<BacktestCell> summarize(const std::vector<BacktestEntry>& entries,
                                    const std::vector<std::string>& config_order) {
    std::vector<BacktestCell> out;
    std::vector<std::size_t> horizons;
    for (const auto& e : entries) horizons.push_back(e.horizon);
    std::sort(horizons.begin(), horizons.end());
    horizons.erase(std::unique(horizons.begin(), horizons.end()), horizons.end());
    std::vector<std::string> seen;
    for (const auto& config : config_order) {
        if (std::find(seen.begin(), seen.end(), config) != seen.end()) continue;
        seen.push_back(config);
        for (std::size_t h : horizons) {
            std::vector<double> maes, smapes;
            for (const auto& e : entries) {
                if (e.config == config && e.horizon == h) {
                    maes.push_back(e.mae);
                    smapes.push_back(e.smape);
                }
            }
            if (maes.empty()) continue;
            BacktestCell c;
            c.config = config;
            c.horizon = h;
            c.n = maes.size();
            std::tie(c.mae_mean, c.mae_std) = mean_sd(maes);
            std::tie(c.smape_mean, c.smape_std) = mean_sd(smapes);
            out.push_back(c);
        }
    }
    return out;
}

void check_span(const PanelDataset& panel, Date origin, std::size_t horizon, std::size_t encoder_length) {
    const long history = days_between(panel.start(), origin) - static_cast<long>(kLagWarmup);
    const long need = static_cast<long>(encoder_length + horizon + 1);
    if (history < need) {
        throw ValidationError("insufficient span: " + std::to_string(std::max(history, 0L)) +
                              " usable history days before " + format_date(origin) + ", need " +
                              std::to_string(need) + " (short by " + std::to_string(need - history) + ")");
    }
    const long after = days_between(origin, panel.range().last);
    if (after < static_cast<long>(horizon)) {
        throw ValidationError("insufficient span: " + std::to_string(std::max(after, 0L)) + " days after " +
                              format_date(origin) + ", horizon needs " + std::to_string(horizon) + " (short by " +
                              std::to_string(static_cast<long>(horizon) - after) + ")");
    }
}

Date default_origin(const PanelDataset& panel, const std::vector<std::size_t>& horizons) {
    if (horizons.empty()) throw ValidationError("no horizons given");
    const auto h = *std::max_element(horizons.begin(), horizons.end());
    return add_days(panel.range().last, -static_cast<long>(h));
}

models::ModelInput job_input(const PanelDataset& panel, const std::string& advertiser, const GridEntry& entry,
                             const ClusterSet& clusters, Date origin, std::size_t horizon, std::uint64_t seed) {
    const clustering::ClusterAssignment* a = nullptr;
    if (is_competition(entry.composition.tag)) {
        const auto it = clusters.find(required_method(entry.composition.tag));
        if (it == clusters.end()) {
            throw ValidationError("composition " + to_string(entry.composition.tag) + " needs " +
                                  clustering::to_string(required_method(entry.composition.tag)) +
                                  " clusters, which have not been computed");
        }
        a = &it->second;
    }
    return compose(panel, advertiser, entry.composition, a, {panel.start(), origin}, horizon, seed);
}

std::vector<double> actual_cpc(const PanelDataset& panel, const std::string& advertiser, Date origin,
                               std::size_t horizon) {
    const auto& s = panel.at(advertiser);
    const std::size_t o = panel.offset_of(origin);
    if (o + horizon > s.size()) throw ValidationError("actuals end after the panel");
    return {s.cpc.begin() + static_cast<std::ptrdiff_t>(o), s.cpc.begin() + static_cast<std::ptrdiff_t>(o + horizon)};
}

void run_queue(std::size_t count, std::size_t parallelism, const std::function<void(std::size_t)>& job) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            {
                std::lock_guard lock(error_mutex);
                if (error) return;
            }
            try {
                job(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(parallelism, count));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    if (error) std::rethrow_exception(error);
}

BacktestReport backtest(const PanelDataset& panel, const std::vector<GridEntry>& grid, const ClusterSet& clusters,
                        const BacktestOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    if (grid.empty()) throw ValidationError("backtest grid is empty");
    for (const auto& e : grid) {
        if (e.model.kind == ModelKind::sarima && e.composition.tag != Composition::univar) {
            throw ValidationError("sarima is univariate only; got composition " + to_string(e.composition.tag));
        }
    }
    std::vector<Date> origins = options.origins;
    if (origins.empty()) origins.push_back(default_origin(panel, options.horizons));
    for (Date o : origins) {
        for (std::size_t h : options.horizons) check_span(panel, o, h, options.encoder_length);
    }
    std::vector<std::string> ids = options.advertisers;
    if (ids.empty()) {
        for (const auto& a : panel.advertisers()) ids.push_back(a.advertiser_id);
    }
    for (const auto& id : ids) panel.at(id);

    struct Job {
        Date origin;
        std::size_t advertiser, entry, horizon;
    };
    std::vector<Job> jobs;
    for (Date o : origins) {
        for (std::size_t a = 0; a < ids.size(); ++a) {
            for (std::size_t e = 0; e < grid.size(); ++e) {
                for (std::size_t h : options.horizons) jobs.push_back({o, a, e, h});
            }
        }
    }
    std::vector<BacktestEntry> results(jobs.size());
    run_queue(jobs.size(), options.parallelism, [&](std::size_t i) {
        const Job& j = jobs[i];
        const GridEntry& entry = grid[j.entry];
        models::ModelConfig cfg = entry.model;
        cfg.horizon = j.horizon;
        cfg.encoder_length = options.encoder_length;
        const auto input = job_input(panel, ids[j.advertiser], entry, clusters, j.origin, j.horizon, options.seed);
        const auto model = models::fit(input, cfg);
        const auto forecast = models::predict(model, input);
        const auto m = score(actual_cpc(panel, ids[j.advertiser], j.origin, j.horizon), forecast.point);
        results[i] = {entry.tag(), j.horizon, ids[j.advertiser], j.origin, m.mae, m.smape, input.degraded};
    });

    BacktestReport report;
    report.entries = std::move(results);
    std::vector<std::string> order;
    for (const auto& e : grid) order.push_back(e.tag());
    report.summary = summarize(report.entries, order);
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

void write_backtest_csv(std::ostream& out, const BacktestReport& report) {
    out << "config,horizon,advertiser,origin,mae,smape\n";
    out.precision(17);
    for (const auto& e : report.entries) {
        out << e.config << ',' << e.horizon << ',' << e.advertiser << ',' << format_date(e.origin) << ',' << e.mae
            << ',' << e.smape << '\n';
    }
}

void write_summary_csv(std::ostream& out, const BacktestReport& report) {
    out << "config,horizon,mae_mean,mae_std,smape_mean,smape_std\n";
    out.precision(17);
    for (const auto& c : report.summary) {
        out << c.config << ',' << c.horizon << ',' << c.mae_mean << ',' << c.mae_std << ',' << c.smape_mean << ','
            << c.smape_std << '\n';
    }
}

const RobustnessCell& RobustnessTable::cell(const std::string& window, const std::string& config) const {
    for (const auto& c : cells) {
        if (c.window == window && c.config == config) return c;
    }
    throw NotFoundError("no robustness cell for " + window + " / " + config);
}

RobustnessTable robustness_experiment(const PanelDataset& panel, const std::vector<std::string>& shocked_categories,
                                      const std::vector<NamedWindow>& windows, const ClusterSet& clusters,
                                      const RobustnessOptions& options) {
    RobustnessTable table;
    for (const auto& a : panel.advertisers()) {
        if (std::find(shocked_categories.begin(), shocked_categories.end(), a.category) != shocked_categories.end()) {
            table.advertisers.push_back(a.advertiser_id);
        }
    }
    if (table.advertisers.empty()) throw ValidationError("no advertiser belongs to a shocked category");
    if (windows.empty() || options.configs.empty()) throw ValidationError("robustness needs windows and configs");
    for (const auto& w : windows) {
        if (w.range.length() <= 0) throw ValidationError("window " + w.name + " is empty");
        check_span(panel, w.range.first, static_cast<std::size_t>(w.range.length()), options.model.encoder_length);
        table.windows.push_back(w.name);
    }
    std::vector<GridEntry> entries;
    for (const auto& c : options.configs) {
        entries.push_back({options.model, c});
        table.configs.push_back(entries.back().tag());
    }
    const std::size_t n_adv = table.advertisers.size();
    const std::size_t per_window = entries.size() * n_adv;
    std::vector<double> smapes(windows.size() * per_window);
    run_queue(smapes.size(), options.parallelism, [&](std::size_t i) {
        const auto& w = windows[i / per_window];
        const GridEntry& entry = entries[(i % per_window) / n_adv];
        const std::string& id = table.advertisers[i % n_adv];
        const auto h = static_cast<std::size_t>(w.range.length());
        models::ModelConfig cfg = entry.model;
        cfg.horizon = h;
        cfg.encoder_length = std::max(cfg.encoder_length, h);
        const auto input = job_input(panel, id, entry, clusters, w.range.first, h, options.seed);
        const auto forecast = models::predict(models::fit(input, cfg), input);
        smapes[i] = smape(actual_cpc(panel, id, w.range.first, h), forecast.point);
    });
    for (std::size_t wi = 0; wi < windows.size(); ++wi) {
        for (std::size_t ci = 0; ci < entries.size(); ++ci) {
            const auto first = smapes.begin() + static_cast<std::ptrdiff_t>(wi * per_window + ci * n_adv);
            const auto [m, sd] = mean_sd(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(n_adv)));
            table.cells.push_back({windows[wi].name, table.configs[ci], n_adv, m, sd});
        }
    }
    return table;
}

void write_robustness_csv(std::ostream& out, const RobustnessTable& table) {
    out << "window,config,n,smape_mean,smape_std\n";
    out.precision(17);
    for (const auto& c : table.cells) {
        out << c.window << ',' << c.config << ',' << c.n << ',' << c.smape_mean << ',' << c.smape_std << '\n';
    }
}

WhatIfResult whatif(const models::TrainedModel& model, const models::ModelInput& input,
                    const std::vector<double>& plan) {
    if (!input.budget_variable()) throw ValidationError("model has no budget channel");
    WhatIfResult r;
    r.baseline = models::predict(model, input);
    models::ModelInput scenario = input;
    set_budget_plan(scenario, plan);
    r.scenario = models::predict(model, scenario);
    r.delta.resize(r.baseline.point.size());
    for (std::size_t h = 0; h < r.delta.size(); ++h) r.delta[h] = r.scenario.point[h] - r.baseline.point[h];
    return r;
}

} // namespace adcast::pipeline

#pragma once

#include "adcast/clustering/assignment.hpp"
#include "adcast/models/model.hpp"
#include "adcast/panel/panel.hpp"
#include "adcast/pipeline/compose.hpp"
#include "adcast/pipeline/metrics.hpp"

#include <json.hpp>

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace adcast::pipeline {

using ClusterSet = std::map<clustering::ClusterMethod, clustering::ClusterAssignment>;

/// One grid configuration: model family plus input composition.
struct GridEntry {
    models::ModelConfig model{};
    CompositionKind composition{};

    /// "<kind>.<composition>", e.g. "tft.multivar.comp.dist".
    std::string tag() const;
};

/// 1 SARIMA (univariate) + {GBDT, LSTM, TFT} x 5 compositions.
std::vector<GridEntry> full_grid(const models::ModelConfig& base = {});

/// Grid file: {"base": ModelConfig, "entries": [{"kind", "composition", "peer_limit"?, ...overrides}]}
/// or {"full_grid": true, "base": ...}.
std::vector<GridEntry> grid_from_json(const nlohmann::json& j);
nlohmann::json grid_to_json(const std::vector<GridEntry>& grid);

struct BacktestOptions {
    std::vector<std::size_t> horizons{14, 30, 60};
    std::size_t encoder_length = 90;
    /// Forecast origins; empty means a single origin at panel end minus the largest horizon.
    std::vector<Date> origins;
    /// Advertisers to evaluate; empty means all.
    std::vector<std::string> advertisers;
    std::size_t parallelism = 1;
    std::uint64_t seed = 0;
};

struct BacktestEntry {
    std::string config;
    std::size_t horizon = 0;
    std::string advertiser;
    Date origin{};
    double mae = 0.0;
    double smape = 0.0;
    bool degraded = false;
};

struct BacktestCell {
    std::string config;
    std::size_t horizon = 0;
    std::size_t n = 0;
    double mae_mean = 0.0;
    double mae_std = 0.0;
    double smape_mean = 0.0;
    double smape_std = 0.0;
};

struct BacktestReport {
    std::vector<BacktestEntry> entries;
    /// Ordered by grid position, then horizon.
    std::vector<BacktestCell> summary;
    double seconds = 0.0;

    const BacktestCell& cell(const std::string& config, std::size_t horizon) const;
};

/// Mean and sample standard deviation (n - 1; 0 for one entry) per (config, horizon).
std::vector<BacktestCell> summarize(const std::vector<BacktestEntry>& entries,
                                    const std::vector<std::string>& config_order);

/// Validates that the panel spans the history plus the horizon for every origin.
/// Throws ValidationError naming the shortfall in days.
void check_span(const PanelDataset& panel, Date origin, std::size_t horizon, std::size_t encoder_length);

Date default_origin(const PanelDataset& panel, const std::vector<std::size_t>& horizons);

/// The model input for one job: history from the panel start to the origin.
models::ModelInput job_input(const PanelDataset& panel, const std::string& advertiser, const GridEntry& entry,
                             const ClusterSet& clusters, Date origin, std::size_t horizon, std::uint64_t seed);

/// Actual CPC for [origin, origin + horizon).
std::vector<double> actual_cpc(const PanelDataset& panel, const std::string& advertiser, Date origin,
                               std::size_t horizon);

/// Runs `count` independent jobs on `parallelism` worker threads; the first
/// exception is rethrown after all workers stop.
void run_queue(std::size_t count, std::size_t parallelism, const std::function<void(std::size_t)>& job);

/// For every advertiser x grid entry x horizon x origin: train strictly before
/// the origin, forecast [origin, origin + H) and score. SARIMA entries must be univariate.
BacktestReport backtest(const PanelDataset& panel, const std::vector<GridEntry>& grid, const ClusterSet& clusters,
                        const BacktestOptions& options);

void write_backtest_csv(std::ostream& out, const BacktestReport& report);
void write_summary_csv(std::ostream& out, const BacktestReport& report);

struct NamedWindow {
    std::string name;
    DateRange range;
};

struct RobustnessOptions {
    models::ModelConfig model{};
    std::vector<CompositionKind> configs{{Composition::multivar}, {Composition::comp_dist}};
    std::size_t parallelism = 1;
    std::uint64_t seed = 0;
};

struct RobustnessCell {
    std::string window;
    std::string config;
    std::size_t n = 0;
    double smape_mean = 0.0;
    double smape_std = 0.0;
};

struct RobustnessTable {
    std::vector<std::string> windows;
    std::vector<std::string> configs;
    std::vector<RobustnessCell> cells;  // window-major
    std::vector<std::string> advertisers;

    const RobustnessCell& cell(const std::string& window, const std::string& config) const;
};

/// For each window, trains every config on the shocked-category advertisers
/// with the origin at the window start and the window length as horizon.
/// Throws ValidationError when no advertiser belongs to a shocked category.
RobustnessTable robustness_experiment(const PanelDataset& panel, const std::vector<std::string>& shocked_categories,
                                      const std::vector<NamedWindow>& windows, const ClusterSet& clusters,
                                      const RobustnessOptions& options);

void write_robustness_csv(std::ostream& out, const RobustnessTable& table);

struct WhatIfResult {
    models::ForecastResult baseline;
    models::ForecastResult scenario;
    std::vector<double> delta;
};

/// Scenario forecast with the known-future budget replaced by `budget_plan`.
/// Throws ValidationError "model has no budget channel" for univariate inputs.
WhatIfResult whatif(const models::TrainedModel& model, const models::ModelInput& input,
                    const std::vector<double>& budget_plan);

} // namespace adcast::pipeline

#pragma once

#include "adcast/service/run_store.hpp"

#include <ostream>
#include <vector>

namespace adcast::service {

/// Fits every (advertiser, grid entry, configured horizon) on history before
/// the run origin and stores one bundle per (advertiser, entry). Returns the
/// number of fitted models.
std::size_t train_run(const RunStore& store, const std::vector<pipeline::GridEntry>& grid);

/// Scores the stored models at the run origin against the actuals after it.
/// Throws ValidationError "no trained models" before train_run.
pipeline::BacktestReport backtest_run(const RunStore& store, const std::vector<std::size_t>& horizons);

/// Writes reports/backtest.csv, reports/summary.csv and reports/backtest.json.
void write_backtest_reports(const RunStore& store, const pipeline::BacktestReport& report);

/// Shock windows, shocked categories and distance clusters come from the run;
/// writes reports/robustness.csv.
pipeline::RobustnessTable robustness_run(const RunStore& store);

nlohmann::json report_to_json(const pipeline::BacktestReport& report);

} // namespace adcast::service

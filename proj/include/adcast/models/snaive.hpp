#pragma once

#include "adcast/models/model.hpp"

#include <span>
#include <vector>

namespace adcast::models {

/// forecast[t] = history[n - period + (t mod period)].
std::vector<double> snaive(std::span<const double> history, std::size_t horizon, std::size_t period = 7);

TrainedModel fit_snaive(const ModelInput& input, const ModelConfig& config);
ForecastResult predict_snaive(const TrainedModel& model, const ModelInput& input);

} // namespace adcast::models

#include "adcast/models/snaive.hpp"

#include "adcast/errors.hpp"

namespace adcast::models {

std::vector<double> snaive(std::span<const double> history, std::size_t horizon, std::size_t period) {
    if (period == 0) throw ValidationError("snaive: period must be >= 1");
    if (history.size() < period) {
        throw ValidationError("snaive: history of " + std::to_string(history.size()) +
                              " days is shorter than the period " + std::to_string(period));
    }
    std::vector<double> out(horizon);
    const std::size_t base = history.size() - period;
    for (std::size_t t = 0; t < horizon; ++t) out[t] = history[base + t % period];
    return out;
}

TrainedModel fit_snaive(const ModelInput& input, const ModelConfig& config) {
    if (input.history() < config.period) throw ValidationError("snaive: history shorter than the period");
    TrainedModel m;
    m.kind = ModelKind::snaive;
    m.config = config;
    m.past_names = input.past_names;
    m.known_vars = input.known_vars;
    m.static_names = input.static_names;
    m.state = {{"period", config.period}};
    return m;
}

ForecastResult predict_snaive(const TrainedModel& model, const ModelInput& input) {
    const auto history = input.target_series();
    const auto f = snaive(history, model.config.horizon, model.state.at("period").get<std::size_t>());
    Matrix band(f.size(), model.config.quantiles.size());
    for (std::size_t h = 0; h < f.size(); ++h) {
        for (std::size_t q = 0; q < band.cols(); ++q) band(h, q) = f[h];
    }
    return assemble_forecast(model.config, input, std::move(band));
}

} // namespace adcast::models

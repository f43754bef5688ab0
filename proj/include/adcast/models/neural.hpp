#pragma once

#include "adcast/models/model.hpp"

#include <string>
#include <vector>

namespace adcast::models {

/// Training windows by encoder start index. Validation takes the last 10%
/// of windows; training windows end before the first validation target so
/// the two never share target days (unless the history is too short for a gap).
struct WindowSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

/// Throws ValidationError naming the shortfall when fewer than two windows fit.
WindowSplit split_windows(std::size_t history, std::size_t encoder_length, std::size_t horizon);

/// Single-layer LSTM over the encoder window; a linear head maps the final
/// hidden state to H x Q outputs, plus a per-step linear term in the known
/// future inputs at each target date.
TrainedModel fit_lstm(const ModelInput& input, const ModelConfig& config);
ForecastResult predict_lstm(const TrainedModel& model, const ModelInput& input);

TrainedModel fit_tft(const ModelInput& input, const ModelConfig& config);
ForecastResult predict_tft(const TrainedModel& model, const ModelInput& input);

struct TftInterpretation {
    std::vector<std::string> encoder_names;
    std::vector<double> encoder_importance;
    std::vector<std::string> decoder_names;
    std::vector<double> decoder_importance;
    /// Head-averaged attention averaged over decoder steps, one weight per encoder day.
    std::vector<double> attention;
    /// Encoder-selection weights of all peer and cluster-mean channels combined.
    double competitors = 0.0;
};

/// Throws ValidationError for non-TFT models.
TftInterpretation interpret_tft(const TrainedModel& model, const ModelInput& input);

/// True for channels contributed by the competition composition.
bool is_competitor_channel(const std::string& name);

} // namespace adcast::models

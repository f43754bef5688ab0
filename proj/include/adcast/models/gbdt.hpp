#pragma once

#include "adcast/matrix.hpp"
#include "adcast/models/model.hpp"

#include <json.hpp>

#include <span>
#include <string>
#include <vector>

namespace adcast::models {

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    double gain = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;
    double predict(std::span<const double> row) const;
};

/// Squared-error boosting: prediction = base + sum of tree outputs.
struct Booster {
    double base = 0.0;
    std::vector<Tree> trees;
    double predict(std::span<const double> row) const;
};

/// ½[G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)] − γ
double split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma);

/// Exact greedy boosting with hessians fixed at 1. The base score is mean(y).
Booster fit_booster(const Matrix& x, const std::vector<double>& y, const GbdtConfig& config);

/// Total split gain per feature, normalised to sum to 1 (all zeros when no split was made).
std::vector<double> booster_importance(const std::vector<Booster>& boosters, std::size_t n_features);

struct Tabular {
    Matrix x;
    std::vector<double> y;
    std::vector<std::size_t> anchors;  // last observed row of each sample
    std::vector<std::string> feature_names;
};

/// One row per anchor t with t + 1 >= max(lags) and t + step inside the
/// history: target lags cpc[t - l + 1], every other past channel at t, and
/// every known variable at the target date t + step (one-hot calendar
/// variables collapse to their index). Label cpc[t + step].
Tabular tabularize(const ModelInput& input, std::size_t step, const std::vector<int>& lags);

/// The feature row for anchor t (which may be the last history row) and the given step.
std::vector<double> tabular_row(const ModelInput& input, std::size_t anchor, std::size_t step,
                                const std::vector<int>& lags);

std::vector<std::string> tabular_feature_names(const ModelInput& input, const std::vector<int>& lags);

/// Variable each tabular feature belongs to (index into past_names, then known_vars).
std::vector<std::size_t> tabular_feature_variables(const ModelInput& input, const std::vector<int>& lags);

TrainedModel fit_gbdt(const ModelInput& input, const ModelConfig& config);
ForecastResult predict_gbdt(const TrainedModel& model, const ModelInput& input);

/// Split-gain importance over the tabular features of a fitted GBDT model.
std::vector<double> gbdt_importance(const TrainedModel& model);

nlohmann::json booster_to_json(const Booster& b);
Booster booster_from_json(const nlohmann::json& j);

} // namespace adcast::models

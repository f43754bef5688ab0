#pragma once

#include "adcast/date.hpp"
#include "adcast/matrix.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace adcast::models {

enum class ModelKind { snaive, sarima, gbdt, lstm, tft };

std::string to_string(ModelKind k);
ModelKind parse_model_kind(const std::string& s);

struct SarimaOrder {
    int p = 0, d = 0, q = 0;
    int P = 0, D = 0, Q = 0;
    int s = 7;
    bool operator==(const SarimaOrder&) const = default;
};

enum class InformationCriterion { aic, bic };

struct SarimaConfig {
    /// Search p,q,P,Q in {0,1,2} and d,D in {0,1} by `criterion`; otherwise fit `order`.
    bool auto_grid = true;
    InformationCriterion criterion = InformationCriterion::aic;
    SarimaOrder order{};
    /// Only the most recent observations enter the fit (0 = all).
    std::size_t max_history = 400;
    int max_evaluations = 2000;
};

struct GbdtConfig {
    int rounds = 60;
    int depth = 3;
    double lr = 0.1;
    double lambda = 1.0;
    double gamma = 0.0;
    double min_child = 5.0;
    std::vector<int> lags{1, 2, 3, 7, 14, 28};
};

enum class LossKind { pinball, mse };

struct ModelConfig {
    ModelKind kind = ModelKind::tft;
    std::size_t horizon = 14;
    std::size_t encoder_length = 90;
    std::size_t hidden = 16;
    std::size_t heads = 2;
    std::vector<double> quantiles{0.1, 0.5, 0.9};
    double learning_rate = 5e-3;
    std::size_t epochs = 60;
    std::size_t patience = 10;
    std::size_t batch_size = 32;
    /// Training windows drawn per epoch (sampled without replacement).
    std::size_t windows_per_epoch = 64;
    double clip_norm = 5.0;
    LossKind loss = LossKind::pinball;
    std::uint64_t seed = 0;
    std::size_t period = 7;
    GbdtConfig gbdt{};
    SarimaConfig sarima{};

    /// Throws ValidationError naming every violated field.
    void validate() const;
    /// Index of the median quantile (or the one closest to 0.5).
    std::size_t median_index() const;
};

/// Per-channel z-score parameters, computed on the training portion only.
struct ChannelStats {
    double mean = 0.0;
    double sd = 1.0;
    bool operator==(const ChannelStats&) const = default;
};

/// A known-future variable occupying `width` consecutive columns (one-hot and cyclic encodings are wider than one).
struct KnownVariable {
    std::string name;
    std::size_t begin = 0;
    std::size_t width = 1;
    /// Calendar encodings are already on a unit scale and are not standardised.
    bool standardize = true;
    bool operator==(const KnownVariable&) const = default;
};

/// Model-ready view of one advertiser up to a forecast origin.
///
/// `past` holds every observed day before the origin (T rows); `known` covers
/// the same days plus the H future days (T + H rows). Sequence models read
/// the trailing E rows as their encoder window.
struct ModelInput {
    std::string advertiser_id;
    Date start{};
    std::size_t horizon = 0;
    std::vector<std::string> past_names;
    Matrix past;
    std::vector<KnownVariable> known_vars;
    Matrix known;
    std::vector<std::string> static_names;
    std::vector<double> static_values;
    /// Column of the target (CPC) in `past`.
    std::size_t target = 0;
    /// Set when competition channels fell back to the advertiser's own CPC.
    bool degraded = false;

    std::size_t history() const { return past.rows(); }
    Date origin() const { return add_days(start, static_cast<long>(history())); }
    /// Known-variable index of the budget plan, if present.
    std::optional<std::size_t> budget_variable() const;
    std::vector<double> target_series() const { return past.column(target); }
    /// Throws ValidationError on shape inconsistencies or non-finite values.
    void validate() const;
};

struct ForecastResult {
    std::vector<Date> dates;
    std::vector<double> point;
    /// H x Q, rows non-decreasing.
    Matrix quantile_band;
    std::vector<double> quantiles;
    std::vector<std::string> encoder_names;
    std::vector<double> encoder_importance;
    std::vector<std::string> decoder_names;
    std::vector<double> decoder_importance;
    std::vector<double> attention;
    ModelKind model_kind = ModelKind::snaive;
};

struct TrainedModel {
    ModelKind kind = ModelKind::snaive;
    ModelConfig config{};
    std::vector<std::string> past_names;
    std::vector<KnownVariable> known_vars;
    std::vector<std::string> static_names;
    std::vector<ChannelStats> past_stats;
    std::vector<ChannelStats> known_stats;  // per known column
    std::vector<double> train_loss;
    std::vector<double> validation_loss;
    /// Kind-specific parameters (checkpoint, trees, coefficients).
    nlohmann::json state;
};

/// Stats over the rows of `m`; sd falls back to 1 for constant columns.
std::vector<ChannelStats> column_stats(const Matrix& m, std::size_t rows);

/// Fits the configured model kind on every row of `input`.
TrainedModel fit(const ModelInput& input, const ModelConfig& config);
/// Forecasts the H days after the input's origin.
ForecastResult predict(const TrainedModel& model, const ModelInput& input);

/// max(q*e, (q-1)*e) averaged, e = actual - pred.
double pinball(const std::vector<double>& pred, const std::vector<double>& actual, double q);

/// Sorts every row of the band (monotone rearrangement).
void sort_quantile_rows(Matrix& band);

/// Dates, sorted band and median point for an H x Q band. Importances are
/// uniform over the input's variables and attention uniform over the encoder
/// window; models with real interpretability overwrite them.
ForecastResult assemble_forecast(const ModelConfig& config, const ModelInput& input, Matrix band);

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const TrainedModel& m);
void from_json(const nlohmann::json& j, TrainedModel& m);
void to_json(nlohmann::json& j, const ForecastResult& r);

} // namespace adcast::models

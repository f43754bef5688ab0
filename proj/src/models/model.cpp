#include "adcast/models/model.hpp"

#include "adcast/errors.hpp"
#include "adcast/models/gbdt.hpp"
#include "adcast/models/neural.hpp"
#include "adcast/models/sarima.hpp"
#include "adcast/models/snaive.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace adcast::models {

std::string to_string(ModelKind k) {
    switch (k) {
    case ModelKind::snaive: return "snaive";
    case ModelKind::sarima: return "sarima";
    case ModelKind::gbdt: return "gbdt";
    case ModelKind::lstm: return "lstm";
    case ModelKind::tft: return "tft";
    }
    return "unknown";
}

ModelKind parse_model_kind(const std::string& s) {
    if (s == "snaive") return ModelKind::snaive;
    if (s == "sarima") return ModelKind::sarima;
    if (s == "gbdt" || s == "xgb") return ModelKind::gbdt;
    if (s == "lstm") return ModelKind::lstm;
    if (s == "tft") return ModelKind::tft;
    throw ValidationError("unknown model kind '" + s + "'");
}

void ModelConfig::validate() const {
    std::ostringstream errors;
    if (horizon == 0) errors << " horizon must be >= 1;";
    if (encoder_length < horizon) errors << " encoder_length must be >= horizon;";
    if (quantiles.empty()) errors << " quantiles must not be empty;";
    for (std::size_t i = 0; i < quantiles.size(); ++i) {
        if (!(quantiles[i] > 0.0 && quantiles[i] < 1.0)) errors << " quantiles must lie in (0,1);";
        if (i > 0 && !(quantiles[i] > quantiles[i - 1])) errors << " quantiles must be strictly increasing;";
    }
    if (hidden == 0) errors << " hidden must be >= 1;";
    if (heads == 0) errors << " heads must be >= 1;";
    if (batch_size == 0) errors << " batch_size must be >= 1;";
    if (windows_per_epoch == 0) errors << " windows_per_epoch must be >= 1;";
    if (!(learning_rate > 0.0)) errors << " learning_rate must be > 0;";
    if (epochs == 0) errors << " epochs must be >= 1;";
    if (period == 0) errors << " period must be >= 1;";
    if (gbdt.rounds < 1) errors << " gbdt.rounds must be >= 1;";
    if (gbdt.depth < 0) errors << " gbdt.depth must be >= 0;";
    if (!(gbdt.lr > 0.0)) errors << " gbdt.lr must be > 0;";
    if (gbdt.lambda < 0.0) errors << " gbdt.lambda must be >= 0;";
    for (int l : kind == ModelKind::gbdt ? gbdt.lags : std::vector<int>{}) {
        if (l < 1 || static_cast<std::size_t>(l) > encoder_length) errors << " gbdt.lags must lie in [1, E];";
    }
    const auto& o = sarima.order;
    if (std::min({o.p, o.d, o.q, o.P, o.D, o.Q}) < 0 || o.s < 1) errors << " sarima.order must be non-negative;";
    const std::string msg = errors.str();
    if (!msg.empty()) throw ValidationError("invalid model config:" + msg);
}

std::size_t ModelConfig::median_index() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < quantiles.size(); ++i) {
        if (std::abs(quantiles[i] - 0.5) < std::abs(quantiles[best] - 0.5)) best = i;
    }
    return best;
}

std::optional<std::size_t> ModelInput::budget_variable() const {
    for (std::size_t i = 0; i < known_vars.size(); ++i) {
        if (known_vars[i].name == "adbudget") return i;
    }
    return std::nullopt;
}

void ModelInput::validate() const {
    if (past.rows() == 0) throw ValidationError("model input has no history");
    if (past.cols() != past_names.size()) throw ValidationError("past channel names do not match columns");
    if (target >= past.cols()) throw ValidationError("target column out of range");
    if (known.rows() != past.rows() + horizon) {
        throw ValidationError("known-future rows must equal history + horizon");
    }
    std::size_t width = 0;
    for (const auto& v : known_vars) {
        if (v.begin != width) throw ValidationError("known variables must be contiguous");
        width += v.width;
    }
    if (width != known.cols()) throw ValidationError("known variable widths do not match columns");
    if (static_values.size() != static_names.size()) throw ValidationError("static names do not match values");
    for (double v : past.data()) {
        if (!std::isfinite(v)) throw ValidationError("model input for " + advertiser_id + " has missing values");
    }
    for (double v : known.data()) {
        if (!std::isfinite(v)) throw ValidationError("model input for " + advertiser_id + " has missing values");
    }
}

std::vector<ChannelStats> column_stats(const Matrix& m, std::size_t rows) {
    rows = std::min(rows, m.rows());
    std::vector<ChannelStats> out(m.cols());
    if (rows == 0) return out;
    for (std::size_t c = 0; c < m.cols(); ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < rows; ++r) s += m(r, c);
        const double mu = s / static_cast<double>(rows);
        double ss = 0.0;
        for (std::size_t r = 0; r < rows; ++r) ss += (m(r, c) - mu) * (m(r, c) - mu);
        const double sd = std::sqrt(ss / static_cast<double>(rows));
        out[c] = {mu, sd > 1e-12 * (1.0 + std::abs(mu)) ? sd : 1.0};
    }
    return out;
}

TrainedModel fit(const ModelInput& input, const ModelConfig& config) {
    config.validate();
    input.validate();
    switch (config.kind) {
    case ModelKind::snaive: return fit_snaive(input, config);
    case ModelKind::sarima: return fit_sarima(input, config);
    case ModelKind::gbdt: return fit_gbdt(input, config);
    case ModelKind::lstm: return fit_lstm(input, config);
    case ModelKind::tft: return fit_tft(input, config);
    }
    throw ValidationError("unknown model kind");
}

ForecastResult predict(const TrainedModel& model, const ModelInput& input) {
    input.validate();
    if (input.horizon != model.config.horizon) {
        throw ValidationError("input horizon " + std::to_string(input.horizon) + " does not match model horizon " +
                              std::to_string(model.config.horizon));
    }
    switch (model.kind) {
    case ModelKind::snaive: return predict_snaive(model, input);
    case ModelKind::sarima: return predict_sarima(model, input);
    case ModelKind::gbdt: return predict_gbdt(model, input);
    case ModelKind::lstm: return predict_lstm(model, input);
    case ModelKind::tft: return predict_tft(model, input);
    }
    throw ValidationError("unknown model kind");
}

double pinball(const std::vector<double>& pred, const std::vector<double>& actual, double q) {
    if (pred.size() != actual.size() || pred.empty()) throw ValidationError("pinball: lengths differ or are zero");
    if (!(q > 0.0 && q < 1.0)) throw ValidationError("pinball: q must lie in (0,1)");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = actual[i] - pred[i];
        s += std::max(q * e, (q - 1.0) * e);
    }
    return s / static_cast<double>(pred.size());
}

void sort_quantile_rows(Matrix& band) {
    for (std::size_t r = 0; r < band.rows(); ++r) {
        auto row = band.row(r);
        std::sort(row.begin(), row.end());
    }
}

ForecastResult assemble_forecast(const ModelConfig& config, const ModelInput& input, Matrix band) {
    ForecastResult r;
    r.model_kind = config.kind;
    sort_quantile_rows(band);
    r.quantiles = config.quantiles;
    const std::size_t mid = config.median_index();
    for (std::size_t h = 0; h < band.rows(); ++h) {
        r.dates.push_back(add_days(input.origin(), static_cast<long>(h)));
        r.point.push_back(band(h, mid));
    }
    r.quantile_band = std::move(band);
    r.encoder_names = input.past_names;
    for (const auto& v : input.known_vars) {
        r.encoder_names.push_back(v.name);
        r.decoder_names.push_back(v.name);
    }
    if (!r.encoder_names.empty()) {
        r.encoder_importance.assign(r.encoder_names.size(), 1.0 / static_cast<double>(r.encoder_names.size()));
    }
    if (!r.decoder_names.empty()) {
        r.decoder_importance.assign(r.decoder_names.size(), 1.0 / static_cast<double>(r.decoder_names.size()));
    }
    r.attention.assign(config.encoder_length, 1.0 / static_cast<double>(config.encoder_length));
    return r;
}

// --- serialization --------------------------------------------------------

void to_json(nlohmann::json& j, const ModelConfig& c) {
    const auto& o = c.sarima.order;
    j = {{"kind", to_string(c.kind)},
         {"horizon", c.horizon},
         {"encoder_length", c.encoder_length},
         {"hidden", c.hidden},
         {"heads", c.heads},
         {"quantiles", c.quantiles},
         {"learning_rate", c.learning_rate},
         {"epochs", c.epochs},
         {"patience", c.patience},
         {"batch_size", c.batch_size},
         {"windows_per_epoch", c.windows_per_epoch},
         {"clip_norm", c.clip_norm},
         {"loss", c.loss == LossKind::pinball ? "pinball" : "mse"},
         {"seed", c.seed},
         {"period", c.period},
         {"gbdt",
          {{"rounds", c.gbdt.rounds},
           {"depth", c.gbdt.depth},
           {"lr", c.gbdt.lr},
           {"lambda", c.gbdt.lambda},
           {"gamma", c.gbdt.gamma},
           {"min_child", c.gbdt.min_child},
           {"lags", c.gbdt.lags}}},
         {"sarima",
          {{"auto_grid", c.sarima.auto_grid},
           {"criterion", c.sarima.criterion == InformationCriterion::bic ? "bic" : "aic"},
           {"order", {o.p, o.d, o.q, o.P, o.D, o.Q, o.s}},
           {"max_history", c.sarima.max_history},
           {"max_evaluations", c.sarima.max_evaluations}}}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    try {
        ModelConfig d;
        c.kind = parse_model_kind(j.value("kind", to_string(d.kind)));
        c.horizon = j.value("horizon", d.horizon);
        c.encoder_length = j.value("encoder_length", d.encoder_length);
        c.hidden = j.value("hidden", d.hidden);
        c.heads = j.value("heads", d.heads);
        c.quantiles = j.value("quantiles", d.quantiles);
        c.learning_rate = j.value("learning_rate", d.learning_rate);
        c.epochs = j.value("epochs", d.epochs);
        c.patience = j.value("patience", d.patience);
        c.batch_size = j.value("batch_size", d.batch_size);
        c.windows_per_epoch = j.value("windows_per_epoch", d.windows_per_epoch);
        c.clip_norm = j.value("clip_norm", d.clip_norm);
        const std::string loss = j.value("loss", std::string("pinball"));
        if (loss != "pinball" && loss != "mse") throw ValidationError("unknown loss '" + loss + "'");
        c.loss = loss == "mse" ? LossKind::mse : LossKind::pinball;
        c.seed = j.value("seed", d.seed);
        c.period = j.value("period", d.period);
        c.gbdt = d.gbdt;
        if (j.contains("gbdt")) {
            const auto& g = j.at("gbdt");
            c.gbdt.rounds = g.value("rounds", d.gbdt.rounds);
            c.gbdt.depth = g.value("depth", d.gbdt.depth);
            c.gbdt.lr = g.value("lr", d.gbdt.lr);
            c.gbdt.lambda = g.value("lambda", d.gbdt.lambda);
            c.gbdt.gamma = g.value("gamma", d.gbdt.gamma);
            c.gbdt.min_child = g.value("min_child", d.gbdt.min_child);
            c.gbdt.lags = g.value("lags", d.gbdt.lags);
        }
        c.sarima = d.sarima;
        if (j.contains("sarima")) {
            const auto& s = j.at("sarima");
            c.sarima.auto_grid = s.value("auto_grid", d.sarima.auto_grid);
            if (s.contains("order")) {
                const auto o = s.at("order").get<std::vector<int>>();
                if (o.size() != 7 && o.size() != 6) throw ValidationError("sarima.order needs 6 or 7 integers");
                c.sarima.order = {o[0], o[1], o[2], o[3], o[4], o[5], o.size() == 7 ? o[6] : 7};
            }
            const std::string criterion = s.value("criterion", std::string("aic"));
            if (criterion != "aic" && criterion != "bic") throw ValidationError("unknown criterion '" + criterion + "'");
            c.sarima.criterion = criterion == "bic" ? InformationCriterion::bic : InformationCriterion::aic;
            c.sarima.max_history = s.value("max_history", d.sarima.max_history);
            c.sarima.max_evaluations = s.value("max_evaluations", d.sarima.max_evaluations);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("invalid model config: ") + e.what());
    }
}

namespace {

nlohmann::json stats_json(const std::vector<ChannelStats>& s) {
    auto a = nlohmann::json::array();
    for (const auto& c : s) a.push_back({c.mean, c.sd});
    return a;
}

std::vector<ChannelStats> stats_from(const nlohmann::json& a) {
    std::vector<ChannelStats> out;
    for (const auto& c : a) out.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
    return out;
}

} // namespace

void to_json(nlohmann::json& j, const TrainedModel& m) {
    auto vars = nlohmann::json::array();
    for (const auto& v : m.known_vars) {
        vars.push_back({{"name", v.name}, {"begin", v.begin}, {"width", v.width}, {"standardize", v.standardize}});
    }
    j = {{"kind", to_string(m.kind)},
         {"config", m.config},
         {"past_names", m.past_names},
         {"known_vars", vars},
         {"static_names", m.static_names},
         {"past_stats", stats_json(m.past_stats)},
         {"known_stats", stats_json(m.known_stats)},
         {"train_loss", m.train_loss},
         {"validation_loss", m.validation_loss},
         {"state", m.state}};
}

void from_json(const nlohmann::json& j, TrainedModel& m) {
    try {
        m.kind = parse_model_kind(j.at("kind").get<std::string>());
        m.config = j.at("config").get<ModelConfig>();
        m.past_names = j.at("past_names").get<std::vector<std::string>>();
        m.known_vars.clear();
        for (const auto& v : j.at("known_vars")) {
            m.known_vars.push_back({v.at("name").get<std::string>(), v.at("begin").get<std::size_t>(),
                                    v.at("width").get<std::size_t>(), v.at("standardize").get<bool>()});
        }
        m.static_names = j.at("static_names").get<std::vector<std::string>>();
        m.past_stats = stats_from(j.at("past_stats"));
        m.known_stats = stats_from(j.at("known_stats"));
        m.train_loss = j.at("train_loss").get<std::vector<double>>();
        m.validation_loss = j.at("validation_loss").get<std::vector<double>>();
        m.state = j.at("state");
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("invalid model file: ") + e.what());
    }
}

void to_json(nlohmann::json& j, const ForecastResult& r) {
    std::vector<std::string> dates;
    for (Date d : r.dates) dates.push_back(format_date(d));
    std::vector<std::vector<double>> band;
    for (std::size_t i = 0; i < r.quantile_band.rows(); ++i) {
        const auto row = r.quantile_band.row(i);
        band.emplace_back(row.begin(), row.end());
    }
    j = {{"model_kind", to_string(r.model_kind)},
         {"dates", dates},
         {"point", r.point},
         {"quantiles", r.quantiles},
         {"quantile_band", band},
         {"encoder_names", r.encoder_names},
         {"encoder_importance", r.encoder_importance},
         {"decoder_names", r.decoder_names},
         {"decoder_importance", r.decoder_importance},
         {"attention", r.attention}};
}

} // namespace adcast::models

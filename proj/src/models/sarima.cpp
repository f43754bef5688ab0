#include "adcast/models/sarima.hpp"

#include "adcast/errors.hpp"
#include "adcast/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace adcast::models {

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                             double step, int max_evaluations, double tol) {
    const std::size_t n = x0.size();
    NelderMeadResult r;
    if (n == 0) {
        r.value = f(x0);
        r.evaluations = 1;
        r.converged = true;
        r.x = std::move(x0);
        return r;
    }
    std::vector<std::vector<double>> simplex(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += step;
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i <= n; ++i) fv[i] = f(simplex[i]);
    r.evaluations = static_cast<int>(n + 1);

    std::vector<std::size_t> order(n + 1);
    auto eval = [&](const std::vector<double>& x) {
        ++r.evaluations;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };
    while (true) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];
        if (std::abs(fv[worst] - fv[best]) <= tol * (std::abs(fv[best]) + tol)) {
            r.converged = true;
            break;
        }
        if (r.evaluations >= max_evaluations) break;

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k] / static_cast<double>(n);
        }
        auto along = [&](double t) {
            std::vector<double> x(n);
            for (std::size_t k = 0; k < n; ++k) x[k] = centroid[k] + t * (simplex[worst][k] - centroid[k]);
            return x;
        };
        const auto xr = along(-1.0);
        const double fr = eval(xr);
        if (fr < fv[best]) {
            const auto xe = along(-2.0);
            const double fe = eval(xe);
            if (fe < fr) {
                simplex[worst] = xe;
                fv[worst] = fe;
            } else {
                simplex[worst] = xr;
                fv[worst] = fr;
            }
        } else if (fr < fv[second]) {
            simplex[worst] = xr;
            fv[worst] = fr;
        } else {
            const bool outside = fr < fv[worst];
            const auto xc = along(outside ? -0.5 : 0.5);
            const double fc = eval(xc);
            if (fc < (outside ? fr : fv[worst])) {
                simplex[worst] = xc;
                fv[worst] = fc;
            } else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t k = 0; k < n; ++k) simplex[i][k] = simplex[best][k] + 0.5 * (simplex[i][k] - simplex[best][k]);
                    fv[i] = eval(simplex[i]);
                }
            }
        }
    }
    const std::size_t best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
    r.x = simplex[best];
    r.value = fv[best];
    return r;
}

std::vector<double> stationary_from_unconstrained(std::span<const double> u) {
    std::vector<double> phi;
    for (std::size_t m = 0; m < u.size(); ++m) {
        const double r = std::tanh(u[m]);
        std::vector<double> next(m + 1);
        for (std::size_t j = 0; j < m; ++j) next[j] = phi[j] - r * phi[m - 1 - j];
        next[m] = r;
        phi = std::move(next);
    }
    return phi;
}

namespace {

using Poly = std::vector<double>;  // coefficient of B^i at index i

Poly multiply(const Poly& a, const Poly& b) {
    Poly out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    }
    return out;
}

// 1 + sign * sum c_j B^(lag * j)
Poly lag_poly(const std::vector<double>& c, int lag, double sign) {
    Poly p(c.size() * static_cast<std::size_t>(lag) + 1, 0.0);
    p[0] = 1.0;
    for (std::size_t j = 0; j < c.size(); ++j) p[(j + 1) * static_cast<std::size_t>(lag)] = sign * c[j];
    return p;
}

struct Expanded {
    std::vector<double> ar;  // y_t = sum ar[i-1] y_{t-i} + ...
    std::vector<double> ma;  // ... + e_t + sum ma[j-1] e_{t-j}
};

Expanded expand(const SarimaFit& m) {
    Poly ar = multiply(lag_poly(m.ar, 1, -1.0), lag_poly(m.sar, m.order.s, -1.0));
    for (int i = 0; i < m.order.d; ++i) ar = multiply(ar, {1.0, -1.0});
    for (int i = 0; i < m.order.D; ++i) ar = multiply(ar, lag_poly({1.0}, m.order.s, -1.0));
    const Poly ma = multiply(lag_poly(m.ma, 1, 1.0), lag_poly(m.sma, m.order.s, 1.0));
    Expanded e;
    for (std::size_t i = 1; i < ar.size(); ++i) e.ar.push_back(-ar[i]);
    for (std::size_t j = 1; j < ma.size(); ++j) e.ma.push_back(ma[j]);
    return e;
}

// Residuals on the centred levels; entries before the AR start-up (e.ar.size()) are zero.
std::vector<double> residuals(std::span<const double> y, double mean, const Expanded& e) {
    std::vector<double> res(y.size(), 0.0);
    for (std::size_t t = e.ar.size(); t < y.size(); ++t) {
        double pred = 0.0;
        for (std::size_t i = 0; i < e.ar.size(); ++i) pred += e.ar[i] * (y[t - i - 1] - mean);
        for (std::size_t j = 0; j < e.ma.size() && j < t; ++j) pred += e.ma[j] * res[t - j - 1];
        res[t] = (y[t] - mean) - pred;
    }
    return res;
}

std::size_t n_coefficients(const SarimaOrder& o) { return static_cast<std::size_t>(o.p + o.q + o.P + o.Q); }

void unpack(SarimaFit& m, std::span<const double> u) {
    const auto& o = m.order;
    std::size_t at = 0;
    auto take = [&](int k, double sign) {
        auto phi = stationary_from_unconstrained(u.subspan(at, static_cast<std::size_t>(k)));
        at += static_cast<std::size_t>(k);
        for (double& v : phi) v *= sign;
        return phi;
    };
    m.ar = take(o.p, 1.0);
    m.ma = take(o.q, -1.0);
    m.sar = take(o.P, 1.0);
    m.sma = take(o.Q, -1.0);
}

} // namespace

SarimaFit fit_sarima_order(std::span<const double> y, const SarimaOrder& order, int max_evaluations,
                           std::size_t sample_start) {
    const std::size_t k = n_coefficients(order);
    const std::size_t need = 10 * (k + 2);
    if (y.size() < need) {
        throw ValidationError("sarima: " + std::to_string(y.size()) + " observations, need at least " +
                              std::to_string(need));
    }
    if (order.s < 1 || std::min({order.p, order.d, order.q, order.P, order.D, order.Q}) < 0) {
        throw ValidationError("sarima: invalid order");
    }
    for (double v : y) {
        if (!std::isfinite(v)) throw ValidationError("sarima: series has missing values");
    }
    SarimaFit m;
    m.order = order;
    m.history.assign(y.begin(), y.end());
    m.has_mean = order.d == 0 && order.D == 0;
    m.mean = m.has_mean ? stats::mean(y) : 0.0;
    const std::size_t lag_span = static_cast<std::size_t>(order.p + order.d + order.s * (order.P + order.D));
    if (lag_span + 2 >= y.size()) throw ValidationError("sarima: series shorter than the model's lag span");
    const std::size_t start = std::max(sample_start, lag_span);
    if (start + 2 >= y.size()) throw ValidationError("sarima: sample start leaves too few observations");

    auto css = [&](const std::vector<double>& u) {
        SarimaFit trial;
        trial.order = m.order;
        unpack(trial, u);
        const Expanded e = expand(trial);
        const auto res = residuals(m.history, m.mean, e);
        double s = 0.0;
        for (std::size_t t = start; t < res.size(); ++t) s += res[t] * res[t];
        return s;
    };
    const auto nm = nelder_mead(css, std::vector<double>(k, 0.0), 0.3, max_evaluations, 1e-10);
    if (!nm.converged) {
        throw NumericalError("sarima: simplex search did not converge after " + std::to_string(nm.evaluations) +
                             " evaluations (best CSS " + std::to_string(nm.value) + ")");
    }
    unpack(m, nm.x);
    m.evaluations = nm.evaluations;
    m.n_eff = y.size() - start;
    m.css = nm.value;
    m.sigma2 = m.css / static_cast<double>(m.n_eff);
    const double n_params = static_cast<double>(k) + 1.0 + (m.has_mean ? 1.0 : 0.0);
    const double fit_term = static_cast<double>(m.n_eff) * std::log(std::max(m.sigma2, 1e-300));
    m.aic = fit_term + 2.0 * n_params;
    m.bic = fit_term + std::log(static_cast<double>(m.n_eff)) * n_params;
    return m;
}

namespace {

/// Smallest root modulus of 1 + c[0] z + c[1] z^2 (degree <= 2); infinity for a constant polynomial.
double min_root_modulus(const std::vector<double>& c) {
    const double a = c.size() > 1 ? c[1] : 0.0, b = c.empty() ? 0.0 : c[0];
    if (a == 0.0) return b == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / std::abs(b);
    const double disc = b * b - 4.0 * a;
    if (disc < 0.0) return std::sqrt(1.0 / std::abs(a));
    const double r = std::sqrt(disc);
    return std::min(std::abs((-b + r) / (2.0 * a)), std::abs((-b - r) / (2.0 * a)));
}

/// CSS happily parks roots on the unit circle, where near-cancelling AR and
/// MA factors fit noise; such fits are skipped during order search.
bool near_unit_root(const SarimaFit& f) {
    constexpr double kMargin = 1.01;
    const double seasonal = std::pow(kMargin, f.order.s);
    auto negated = [](std::vector<double> c) {
        for (double& v : c) v = -v;
        return c;
    };
    return min_root_modulus(negated(f.ar)) < kMargin || min_root_modulus(f.ma) < kMargin ||
           min_root_modulus(negated(f.sar)) < seasonal || min_root_modulus(f.sma) < seasonal;
}

} // namespace

SarimaFit auto_sarima(std::span<const double> y, const SarimaConfig& config) {
    // Every order is scored on the same residual sample so AICs are comparable.
    const std::size_t common_start = static_cast<std::size_t>(2 + 1 + config.order.s * (2 + 1));
    auto score = [&](const SarimaFit& f) { return config.criterion == InformationCriterion::bic ? f.bic : f.aic; };
    std::optional<SarimaFit> best;
    std::string last_error;
    for (int d = 0; d <= 1; ++d) {
        for (int D = 0; D <= 1; ++D) {
            for (int p = 0; p <= 2; ++p) {
                for (int q = 0; q <= 2; ++q) {
                    for (int P = 0; P <= 2; ++P) {
                        for (int Q = 0; Q <= 2; ++Q) {
                            const SarimaOrder o{p, d, q, P, D, Q, config.order.s};
                            try {
                                auto fit = fit_sarima_order(y, o, config.max_evaluations, common_start);
                                if (near_unit_root(fit)) continue;
                                if (!best || score(fit) < score(*best)) best = std::move(fit);
                            } catch (const Error& e) {
                                last_error = e.what();
                            }
                        }
                    }
                }
            }
        }
    }
    if (!best) throw NumericalError("sarima: no order in the grid could be fitted (" + last_error + ")");
    return *best;
}

Matrix forecast_sarima(const SarimaFit& fit, std::size_t horizon, const std::vector<double>& quantiles) {
    const Expanded e = expand(fit);
    std::vector<double> res = residuals(fit.history, fit.mean, e);
    std::vector<double> y(fit.history.size());
    for (std::size_t t = 0; t < y.size(); ++t) y[t] = fit.history[t] - fit.mean;
    const std::size_t n = y.size();
    y.resize(n + horizon, 0.0);
    res.resize(n + horizon, 0.0);
    for (std::size_t h = 0; h < horizon; ++h) {
        const std::size_t t = n + h;
        double v = 0.0;
        for (std::size_t i = 0; i < e.ar.size() && i < t; ++i) v += e.ar[i] * y[t - i - 1];
        for (std::size_t j = 0; j < e.ma.size() && j < t; ++j) v += e.ma[j] * res[t - j - 1];
        y[t] = v;
    }
    // psi weights of the full (differenced) model give the h-step error variance.
    std::vector<double> psi(horizon, 0.0);
    if (horizon > 0) psi[0] = 1.0;
    for (std::size_t j = 1; j < horizon; ++j) {
        double v = j - 1 < e.ma.size() ? e.ma[j - 1] : 0.0;
        for (std::size_t i = 1; i <= std::min(j, e.ar.size()); ++i) v += e.ar[i - 1] * psi[j - i];
        psi[j] = v;
    }
    std::vector<double> z(quantiles.size());
    for (std::size_t q = 0; q < quantiles.size(); ++q) z[q] = stats::normal_quantile(quantiles[q]);
    Matrix band(horizon, quantiles.size());
    double cum = 0.0;
    for (std::size_t h = 0; h < horizon; ++h) {
        cum += psi[h] * psi[h];
        const double sd = std::sqrt(fit.sigma2 * cum);
        const double point = y[n + h] + fit.mean;
        for (std::size_t q = 0; q < quantiles.size(); ++q) band(h, q) = point + z[q] * sd;
    }
    return band;
}

nlohmann::json sarima_to_json(const SarimaFit& f) {
    const auto& o = f.order;
    return {{"order", {o.p, o.d, o.q, o.P, o.D, o.Q, o.s}},
            {"ar", f.ar},
            {"ma", f.ma},
            {"sar", f.sar},
            {"sma", f.sma},
            {"has_mean", f.has_mean},
            {"mean", f.mean},
            {"sigma2", f.sigma2},
            {"css", f.css},
            {"aic", f.aic},
            {"bic", f.bic},
            {"n_eff", f.n_eff},
            {"evaluations", f.evaluations},
            {"history", f.history}};
}

SarimaFit sarima_from_json(const nlohmann::json& j) {
    SarimaFit f;
    const auto o = j.at("order").get<std::vector<int>>();
    f.order = {o.at(0), o.at(1), o.at(2), o.at(3), o.at(4), o.at(5), o.at(6)};
    f.ar = j.at("ar").get<std::vector<double>>();
    f.ma = j.at("ma").get<std::vector<double>>();
    f.sar = j.at("sar").get<std::vector<double>>();
    f.sma = j.at("sma").get<std::vector<double>>();
    f.has_mean = j.at("has_mean").get<bool>();
    f.mean = j.at("mean").get<double>();
    f.sigma2 = j.at("sigma2").get<double>();
    f.css = j.at("css").get<double>();
    f.aic = j.at("aic").get<double>();
    f.bic = j.value("bic", 0.0);
    f.n_eff = j.at("n_eff").get<std::size_t>();
    f.evaluations = j.at("evaluations").get<int>();
    f.history = j.at("history").get<std::vector<double>>();
    return f;
}

TrainedModel fit_sarima(const ModelInput& input, const ModelConfig& config) {
    auto y = input.target_series();
    if (config.sarima.max_history > 0 && y.size() > config.sarima.max_history) {
        y.erase(y.begin(), y.end() - static_cast<std::ptrdiff_t>(config.sarima.max_history));
    }
    const SarimaFit f = config.sarima.auto_grid ? auto_sarima(y, config.sarima)
                                                : fit_sarima_order(y, config.sarima.order, config.sarima.max_evaluations);
    TrainedModel m;
    m.kind = ModelKind::sarima;
    m.config = config;
    m.past_names = {input.past_names.at(input.target)};
    m.static_names = input.static_names;
    m.train_loss = {f.sigma2};
    m.state = sarima_to_json(f);
    return m;
}

ForecastResult predict_sarima(const TrainedModel& model, const ModelInput& input) {
    // Forecasts continue from the stored fit history; the input supplies dates only.
    const SarimaFit f = sarima_from_json(model.state);
    ForecastResult r = assemble_forecast(model.config, input,
                                         forecast_sarima(f, model.config.horizon, model.config.quantiles));
    r.encoder_names = model.past_names;
    r.encoder_importance = {1.0};
    r.decoder_names.clear();
    r.decoder_importance.clear();
    return r;
}

} // namespace adcast::models

#pragma once

#include "adcast/models/model.hpp"

#include <functional>
#include <span>
#include <vector>

namespace adcast::models {

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    int evaluations = 0;
    bool converged = false;
};

/// Derivative-free simplex minimisation. Converges when the spread of the
/// simplex values falls below `tol * (|f_best| + tol)`.
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                             double step = 0.3, int max_evaluations = 2000, double tol = 1e-10);

/// Maps unconstrained reals to the coefficients of a stationary polynomial
/// 1 - sum phi_j z^j through partial autocorrelations tanh(u).
std::vector<double> stationary_from_unconstrained(std::span<const double> u);

struct SarimaFit {
    SarimaOrder order{};
    std::vector<double> ar, ma, sar, sma;
    bool has_mean = false;
    double mean = 0.0;
    double sigma2 = 0.0;
    double css = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    std::size_t n_eff = 0;
    int evaluations = 0;
    bool converged = true;
    std::vector<double> history;
};

/// Conditional-sum-of-squares fit of one order. A mean is estimated only
/// when no differencing is applied. Throws NumericalError on non-convergence
/// (message carries the best-so-far objective) and ValidationError on short input.
/// The CSS sums residuals from max(sample_start, lag span) onwards.
SarimaFit fit_sarima_order(std::span<const double> y, const SarimaOrder& order, int max_evaluations = 2000,
                           std::size_t sample_start = 0);

/// Grid p,q,P,Q in {0,1,2} x d,D in {0,1}; minimal AIC. Orders that fail or
/// need more data than available are skipped.
SarimaFit auto_sarima(std::span<const double> y, const SarimaConfig& config);

/// H x Q levels: iterated expectations plus normal bands from psi-weight variances.
Matrix forecast_sarima(const SarimaFit& fit, std::size_t horizon, const std::vector<double>& quantiles);

TrainedModel fit_sarima(const ModelInput& input, const ModelConfig& config);
ForecastResult predict_sarima(const TrainedModel& model, const ModelInput& input);

nlohmann::json sarima_to_json(const SarimaFit& fit);
SarimaFit sarima_from_json(const nlohmann::json& j);

} // namespace adcast::models

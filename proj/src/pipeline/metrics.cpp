#include "adcast/pipeline/metrics.hpp"

#include "adcast/errors.hpp"

#include <cmath>
#include <string>

namespace adcast::pipeline {

namespace {

void check(std::span<const double> a, std::span<const double> p) {
    if (a.size() != p.size()) {
        throw ValidationError("metric inputs differ in length: " + std::to_string(a.size()) + " vs " +
                              std::to_string(p.size()));
    }
    if (a.empty()) throw ValidationError("metric inputs are empty");
}

} // namespace

double mae(std::span<const double> actual, std::span<const double> pred) {
    check(actual, pred);
    double s = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) s += std::abs(pred[i] - actual[i]);
    return s / static_cast<double>(actual.size());
}

double smape(std::span<const double> actual, std::span<const double> pred) {
    check(actual, pred);
    double s = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const double den = std::abs(actual[i]) + std::abs(pred[i]);
        if (den > 0.0) s += 2.0 * std::abs(pred[i] - actual[i]) / den;
    }
    return s / static_cast<double>(actual.size());
}

MetricSet score(std::span<const double> actual, std::span<const double> pred) {
    return {mae(actual, pred), smape(actual, pred)};
}

} // namespace adcast::pipeline

#pragma once

#include <span>

namespace adcast::pipeline {

struct MetricSet {
    double mae = 0.0;
    double smape = 0.0;
};

/// Mean absolute error. Throws ValidationError on length mismatch or empty input.
double mae(std::span<const double> actual, std::span<const double> pred);

/// Mean of 2|pred - actual| / (|actual| + |pred|) on the [0, 2] scale; 0/0 terms count as 0.
double smape(std::span<const double> actual, std::span<const double> pred);

MetricSet score(std::span<const double> actual, std::span<const double> pred);

} // namespace adcast::pipeline

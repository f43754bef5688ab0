#pragma once

#include <optional>
#include <span>
#include <vector>

namespace adcast::stats {

double mean(std::span<const double> x);

/// Population variance (denominator n).
double variance(std::span<const double> x);

double stdev(std::span<const double> x);

/// Sample standard deviation (denominator n - 1); 0 for fewer than two values.
double sample_stdev(std::span<const double> x);

double median(std::vector<double> x);

/// Pearson correlation; nullopt when either input has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

/// Trailing moving average; output has length n - window + 1.
std::vector<double> moving_average(std::span<const double> x, std::size_t window);

/// Population z-score; zero-variance input maps to all zeros.
std::vector<double> zscore(std::span<const double> x);

/// Inverse standard normal CDF for p in (0, 1).
double normal_quantile(double p);

} // namespace adcast::stats

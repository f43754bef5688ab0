#pragma once

#include "adcast/matrix.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace adcast::clustering {

/// Fourteen descriptive statistics of a daily series.
struct FeatureVector14 {
    double mean = 0.0;
    double variance = 0.0;
    double acf_1 = 0.0;
    double trend = 0.0;
    double linearity = 0.0;
    double curvature = 0.0;
    double season = 0.0;
    double peak = 0.0;
    double trough = 0.0;
    double entropy = 0.0;
    double lumpiness = 0.0;
    double spikiness = 0.0;
    double f_spots = 0.0;
    double c_points = 0.0;
    /// Set for constant input, where the strengths and acf_1 are conventional zeros.
    bool degenerate = false;

    static constexpr std::size_t kSize = 14;
    static constexpr std::array<std::string_view, kSize> kNames{
        "mean", "variance", "acf_1", "trend", "linearity", "curvature", "season",
        "peak", "trough", "entropy", "lumpiness", "spikiness", "f_spots", "c_points"};

    std::array<double, kSize> values() const;
};

/// Classical additive decomposition. The trend is a centered moving average
/// spanning three full periods, which annihilates the periodic component.
struct Decomposition {
    std::size_t begin = 0;  // first index with a defined trend
    std::size_t end = 0;    // one past the last
    std::vector<double> trend;
    std::vector<double> seasonal;
    std::vector<double> remainder;
};

Decomposition decompose(std::span<const double> y, std::size_t period);

/// Throws ValidationError when y is shorter than 3 * period or contains NaN.
FeatureVector14 extract_features(std::span<const double> y, std::size_t period = 7);

/// Column-wise population z-score; zero-variance columns become zeros.
/// Throws ValidationError for fewer than two rows.
Matrix znormalize(const Matrix& points);

Matrix feature_matrix(const std::vector<FeatureVector14>& features);

} // namespace adcast::clustering

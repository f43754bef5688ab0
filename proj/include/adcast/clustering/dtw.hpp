#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace adcast::clustering {

using AlignmentPath = std::vector<std::pair<std::size_t, std::size_t>>;

/// Dynamic time warping distance: square root of the minimal sum of squared
/// pointwise differences over monotone alignments with steps (1,0), (0,1),
/// (1,1), optionally restricted to the Sakoe-Chiba band |i - j| <= window.
double dtw(std::span<const double> x, std::span<const double> y, std::optional<std::size_t> window = std::nullopt);

/// Minimal squared path cost (dtw(x, y)^2 without the final square root).
double dtw_cost(std::span<const double> x, std::span<const double> y, std::optional<std::size_t> window = std::nullopt);

/// DTW cost where matching x[i] to y[j] costs weights[j]^2 * (x[i] - y[j])^2.
/// With all-ones weights this equals dtw_cost exactly.
double dtw_cost_weighted(std::span<const double> x, std::span<const double> y, std::span<const double> weights,
                         std::optional<std::size_t> window = std::nullopt);

struct DtwAlignment {
    double cost = 0.0;  // squared path cost
    AlignmentPath path; // zero-based (i, j) pairs from (0, 0) to (n-1, m-1)
};

DtwAlignment dtw_path(std::span<const double> x, std::span<const double> y,
                      std::optional<std::size_t> window = std::nullopt,
                      std::span<const double> weights = {});

struct DbaOptions {
    std::size_t max_iter = 10;
    double tol = 1e-6;
    std::optional<std::size_t> window;
    /// Per-barycenter-timestamp weights; empty means all ones.
    std::vector<double> weights;
};

struct DbaResult {
    std::vector<double> barycenter;
    /// objective[0] is the cost of the initial barycenter; then one entry per update.
    std::vector<double> objective;
};

/// Index of the DTW medoid of `series_set` (smallest summed squared distance; ties to lowest index).
std::size_t dtw_medoid(const std::vector<std::vector<double>>& series_set, std::optional<std::size_t> window = std::nullopt);

/// DTW barycenter averaging. When `init` is empty the medoid is used.
DbaResult dba(const std::vector<std::vector<double>>& series_set, std::vector<double> init = {},
              const DbaOptions& options = {});

/// Symmetric matrix of pairwise DTW distances with zero diagonal.
struct DistanceMatrix {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> d;
};

DistanceMatrix pairwise_dtw(const std::vector<std::string>& ids, const std::vector<std::vector<double>>& series,
                            std::optional<std::size_t> window = std::nullopt);

} // namespace adcast::clustering

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace adcast::clustering {

struct TsKmeansOptions {
    bool weighted = false;
    std::size_t max_iter = 30;
    std::size_t dba_iter = 3;
    std::optional<std::size_t> window;
    std::size_t n_init = 6;
};

/// k-means over whole series with DTW assignment and DBA centroids.
///
/// When weighted, each cluster carries per-timestamp weights w that enter the
/// alignment cost as w[j]^2 (x - c[j])^2. Given the alignments, the weights
/// minimising the objective under sum(w) = T are proportional to the inverse
/// of the within-cluster aligned variance, so every step of the loop
/// (assignment, barycenter update, weight update) is non-increasing in
///   J = sum_i cost(x_i, c_label(i); w_label(i)) + reg * sum_c sum_j (w_c[j]^2 - 1).
struct TsKmeansResult {
    std::vector<int> labels;
    std::vector<std::vector<double>> centroids;
    std::vector<std::vector<double>> weights;
    double objective = 0.0;
    std::vector<double> objective_history;
    std::size_t iterations = 0;
};

TsKmeansResult tskmeans(const std::vector<std::vector<double>>& series_set, std::size_t k, std::uint64_t seed,
                        const TsKmeansOptions& options = {});

/// Alternation from explicit initial centroids (weights start at one).
TsKmeansResult tskmeans_from(const std::vector<std::vector<double>>& series_set,
                             std::vector<std::vector<double>> centroids, const TsKmeansOptions& options = {});

struct TsKmeansCurve {
    std::map<std::size_t, double> objective_by_k;
    std::map<std::size_t, TsKmeansResult> results;
};

/// Objective for every k in [k_min, k_max], warm-starting k from k-1 so the curve is non-increasing.
TsKmeansCurve tskmeans_curve(const std::vector<std::vector<double>>& series_set, std::size_t k_min, std::size_t k_max,
                             std::uint64_t seed, const TsKmeansOptions& options = {});

} // namespace adcast::clustering

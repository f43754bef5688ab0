#pragma once

#include "adcast/matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

namespace adcast::clustering {

struct KmeansOptions {
    std::size_t max_iter = 100;
    /// Independent k-means++ restarts; the lowest final WCSS wins.
    std::size_t n_init = 5;
};

struct KmeansResult {
    std::vector<int> labels;
    Matrix centroids;
    double wcss = 0.0;
    /// Within-cluster sum of squares after every assignment/update pass.
    std::vector<double> wcss_history;
};

/// Lloyd iterations from k-means++ seeding until the labels stop changing.
KmeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, const KmeansOptions& options = {});

/// Lloyd iterations from the given initial centroids (one restart).
KmeansResult kmeans_from(const Matrix& points, Matrix centroids, const KmeansOptions& options = {});

/// Maximum-curvature elbow of a WCSS curve over [k_min, k_max]: the interior k
/// with the largest second difference; ties resolve to the smaller k.
/// Throws NumericalError when the curve increases with k.
std::size_t elbow(const std::map<std::size_t, double>& wcss_by_k, std::size_t k_min = 2, std::size_t k_max = 12);

struct KmeansCurve {
    std::map<std::size_t, double> wcss_by_k;
    std::map<std::size_t, KmeansResult> results;
};

/// Runs k-means for every k in [k_min, k_max]; each k also gets a warm start
/// from the k-1 solution plus one seeded centre, so the curve is non-increasing.
KmeansCurve kmeans_curve(const Matrix& points, std::size_t k_min, std::size_t k_max, std::uint64_t seed,
                         const KmeansOptions& options = {});

} // namespace adcast::clustering

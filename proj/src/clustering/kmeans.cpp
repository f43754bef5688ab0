#include "adcast/clustering/kmeans.hpp"

#include "adcast/errors.hpp"
#include "adcast/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace adcast::clustering {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

struct Assignment {
    std::vector<int> labels;
    std::vector<double> cost;
};

Assignment assign(const Matrix& points, const Matrix& centroids) {
    Assignment a{std::vector<int>(points.rows(), 0), std::vector<double>(points.rows(), 0.0)};
    for (std::size_t i = 0; i < points.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centroids.rows(); ++c) {
            const double d = sq_dist(points.row(i), centroids.row(c));
            if (d < best) {
                best = d;
                a.labels[i] = static_cast<int>(c);
            }
        }
        a.cost[i] = best;
    }
    return a;
}

double total(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

// Index of the next seed: D^2-weighted draw, or the farthest point when rng is null.
std::size_t next_seed(const Matrix& points, const Matrix& chosen, std::size_t n_chosen, Rng* rng) {
    std::vector<double> d(points.rows(), std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < points.rows(); ++i) {
        for (std::size_t c = 0; c < n_chosen; ++c) d[i] = std::min(d[i], sq_dist(points.row(i), chosen.row(c)));
    }
    const double sum = total(d);
    if (!rng || !(sum > 0.0)) {
        return static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
    }
    double u = rng->uniform() * sum;
    for (std::size_t i = 0; i < d.size(); ++i) {
        u -= d[i];
        if (u < 0.0 && d[i] > 0.0) return i;
    }
    return static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
}

Matrix plus_plus(const Matrix& points, std::size_t k, Rng& rng) {
    Matrix c(k, points.cols());
    const std::size_t first = rng.index(points.rows());
    std::copy(points.row(first).begin(), points.row(first).end(), c.row(0).begin());
    for (std::size_t j = 1; j < k; ++j) {
        const std::size_t idx = next_seed(points, c, j, &rng);
        std::copy(points.row(idx).begin(), points.row(idx).end(), c.row(j).begin());
    }
    return c;
}

void validate(const Matrix& points, std::size_t k) {
    if (k == 0) throw ValidationError("k must be >= 1");
    if (points.rows() < k) throw ValidationError("k exceeds the number of points");
    for (double v : points.data()) {
        if (!std::isfinite(v)) throw ValidationError("k-means input contains non-finite values");
    }
}

} // namespace

KmeansResult kmeans_from(const Matrix& points, Matrix centroids, const KmeansOptions& options) {
    validate(points, centroids.rows());
    if (centroids.cols() != points.cols()) throw ValidationError("centroid dimension mismatch");
    const std::size_t k = centroids.rows();
    KmeansResult r;
    Assignment a = assign(points, centroids);
    for (std::size_t it = 0; it < options.max_iter; ++it) {
        // Re-seed empty clusters with the currently worst-fit point of a multi-member cluster.
        std::vector<std::size_t> counts(k, 0);
        for (int l : a.labels) ++counts[static_cast<std::size_t>(l)];
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t worst = points.rows();
            for (std::size_t i = 0; i < points.rows(); ++i) {
                if (counts[static_cast<std::size_t>(a.labels[i])] < 2) continue;
                if (worst == points.rows() || a.cost[i] > a.cost[worst]) worst = i;
            }
            if (worst == points.rows()) break;
            --counts[static_cast<std::size_t>(a.labels[worst])];
            ++counts[c];
            a.labels[worst] = static_cast<int>(c);
            a.cost[worst] = 0.0;
            std::copy(points.row(worst).begin(), points.row(worst).end(), centroids.row(c).begin());
        }

        Matrix next(k, points.cols(), 0.0);
        for (std::size_t i = 0; i < points.rows(); ++i) {
            auto row = next.row(static_cast<std::size_t>(a.labels[i]));
            const auto p = points.row(i);
            for (std::size_t d = 0; d < p.size(); ++d) row[d] += p[d];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                std::copy(centroids.row(c).begin(), centroids.row(c).end(), next.row(c).begin());
                continue;
            }
            for (double& v : next.row(c)) v /= static_cast<double>(counts[c]);
        }
        centroids = std::move(next);
        Assignment updated = assign(points, centroids);
        r.wcss_history.push_back(total(updated.cost));
        const bool stable = updated.labels == a.labels;
        a = std::move(updated);
        if (stable) break;
    }
    r.labels = std::move(a.labels);
    r.centroids = std::move(centroids);
    r.wcss = total(a.cost);
    if (r.wcss_history.empty()) r.wcss_history.push_back(r.wcss);
    return r;
}

KmeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, const KmeansOptions& options) {
    validate(points, k);
    KmeansResult best;
    bool have = false;
    for (std::size_t run = 0; run < std::max<std::size_t>(1, options.n_init); ++run) {
        Rng rng = Rng::substream(seed, run);
        KmeansResult r = kmeans_from(points, plus_plus(points, k, rng), options);
        if (!have || r.wcss < best.wcss) {
            best = std::move(r);
            have = true;
        }
    }
    return best;
}

std::size_t elbow(const std::map<std::size_t, double>& wcss_by_k, std::size_t k_min, std::size_t k_max) {
    if (k_max < k_min + 2) throw ValidationError("elbow needs at least three values of k");
    for (std::size_t k = k_min; k <= k_max; ++k) {
        if (!wcss_by_k.contains(k)) throw ValidationError("elbow curve is missing k = " + std::to_string(k));
    }
    for (std::size_t k = k_min + 1; k <= k_max; ++k) {
        const double prev = wcss_by_k.at(k - 1), cur = wcss_by_k.at(k);
        if (cur > prev + 1e-9 * std::max(1.0, std::abs(prev))) {
            throw NumericalError("within-cluster cost increases from k = " + std::to_string(k - 1) + " to k = " +
                                 std::to_string(k));
        }
    }
    std::size_t best_k = k_min + 1;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = k_min + 1; k < k_max; ++k) {
        const double curvature = wcss_by_k.at(k - 1) - 2.0 * wcss_by_k.at(k) + wcss_by_k.at(k + 1);
        if (curvature > best) {
            best = curvature;
            best_k = k;
        }
    }
    return best_k;
}

KmeansCurve kmeans_curve(const Matrix& points, std::size_t k_min, std::size_t k_max, std::uint64_t seed,
                         const KmeansOptions& options) {
    if (k_min == 0 || k_min > k_max) throw ValidationError("invalid k range");
    validate(points, k_max);
    KmeansCurve curve;
    for (std::size_t k = k_min; k <= k_max; ++k) {
        KmeansResult r = kmeans(points, k, seed + k, options);
        if (k > k_min) {
            const KmeansResult& prev = curve.results.at(k - 1);
            Matrix init(k, points.cols());
            std::copy(prev.centroids.data().begin(), prev.centroids.data().end(), init.data().begin());
            const std::size_t far = next_seed(points, prev.centroids, k - 1, nullptr);
            std::copy(points.row(far).begin(), points.row(far).end(), init.row(k - 1).begin());
            KmeansResult warm = kmeans_from(points, std::move(init), options);
            if (warm.wcss < r.wcss) r = std::move(warm);
        }
        curve.wcss_by_k[k] = r.wcss;
        curve.results.emplace(k, std::move(r));
    }
    return curve;
}

} // namespace adcast::clustering

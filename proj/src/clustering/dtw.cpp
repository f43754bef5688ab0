#include "adcast/clustering/dtw.hpp"

#include "adcast/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace adcast::clustering {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Band {
    std::size_t n, m, w;

    // Inclusive 1-based column range of DP row i (1..n).
    std::size_t lo(std::size_t i) const { return i > w ? std::max<std::size_t>(1, i - w) : 1; }
    std::size_t hi(std::size_t i) const { return std::min(m, i + w); }
};

Band make_band(std::span<const double> x, std::span<const double> y, std::optional<std::size_t> window,
               std::span<const double> weights) {
    if (x.empty() || y.empty()) throw ValidationError("dtw requires non-empty series");
    if (!weights.empty() && weights.size() != y.size()) {
        throw ValidationError("dtw weights must match the length of the second series");
    }
    const std::size_t n = x.size(), m = y.size();
    std::size_t w = std::max(n, m);
    if (window) {
        const std::size_t gap = n > m ? n - m : m - n;
        if (gap > *window) throw ValidationError("dtw band is narrower than the length difference");
        w = *window;
    }
    for (double v : x) {
        if (std::isnan(v)) throw ValidationError("dtw input contains missing values");
    }
    for (double v : y) {
        if (std::isnan(v)) throw ValidationError("dtw input contains missing values");
    }
    return {n, m, w};
}

inline double local_cost(double a, double b, std::span<const double> weights, std::size_t j) {
    const double d = a - b;
    double c = d * d;
    if (!weights.empty()) c *= weights[j] * weights[j];
    return c;
}

double banded_cost(std::span<const double> x, std::span<const double> y, std::optional<std::size_t> window,
                   std::span<const double> weights) {
    const Band band = make_band(x, y, window, weights);
    std::vector<double> prev(band.m + 1, kInf), cur(band.m + 1, kInf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= band.n; ++i) {
        const std::size_t lo = band.lo(i), hi = band.hi(i);
        cur[lo - 1] = kInf;
        if (hi < band.m) cur[hi + 1] = kInf;
        for (std::size_t j = lo; j <= hi; ++j) {
            const double best = std::min({prev[j], cur[j - 1], prev[j - 1]});
            cur[j] = best + local_cost(x[i - 1], y[j - 1], weights, j - 1);
        }
        std::swap(prev, cur);
        cur[0] = kInf;
    }
    return prev[band.m];
}

} // namespace

double dtw_cost(std::span<const double> x, std::span<const double> y, std::optional<std::size_t> window) {
    return banded_cost(x, y, window, {});
}

double dtw(std::span<const double> x, std::span<const double> y, std::optional<std::size_t> window) {
    return std::sqrt(dtw_cost(x, y, window));
}

double dtw_cost_weighted(std::span<const double> x, std::span<const double> y, std::span<const double> weights,
                         std::optional<std::size_t> window) {
    if (weights.size() != y.size()) throw ValidationError("dtw weights must match the length of the second series");
    return banded_cost(x, y, window, weights);
}

DtwAlignment dtw_path(std::span<const double> x, std::span<const double> y, std::optional<std::size_t> window,
                      std::span<const double> weights) {
    const Band band = make_band(x, y, window, weights);
    // Banded storage: row i holds columns [lo(i), hi(i)].
    std::vector<std::size_t> offset(band.n + 2, 0);
    for (std::size_t i = 1; i <= band.n; ++i) offset[i + 1] = offset[i] + (band.hi(i) - band.lo(i) + 1);
    std::vector<double> cells(offset[band.n + 1], kInf);
    auto at = [&](std::size_t i, std::size_t j) -> double {
        if (i == 0) return j == 0 ? 0.0 : kInf;
        if (j == 0 || j < band.lo(i) || j > band.hi(i)) return kInf;
        return cells[offset[i] + (j - band.lo(i))];
    };
    for (std::size_t i = 1; i <= band.n; ++i) {
        const std::size_t lo = band.lo(i);
        for (std::size_t j = lo; j <= band.hi(i); ++j) {
            const double best = std::min({at(i - 1, j), at(i, j - 1), at(i - 1, j - 1)});
            cells[offset[i] + (j - lo)] = best + local_cost(x[i - 1], y[j - 1], weights, j - 1);
        }
    }

    DtwAlignment out;
    out.cost = at(band.n, band.m);
    std::size_t i = band.n, j = band.m;
    out.path.emplace_back(i - 1, j - 1);
    while (i > 1 || j > 1) {
        const double diag = at(i - 1, j - 1), up = at(i - 1, j), left = at(i, j - 1);
        if (diag <= up && diag <= left) {
            --i;
            --j;
        } else if (up <= left) {
            --i;
        } else {
            --j;
        }
        out.path.emplace_back(i - 1, j - 1);
    }
    std::reverse(out.path.begin(), out.path.end());
    return out;
}

std::size_t dtw_medoid(const std::vector<std::vector<double>>& series_set, std::optional<std::size_t> window) {
    if (series_set.empty()) throw ValidationError("medoid of an empty set");
    const std::size_t n = series_set.size();
    std::vector<double> total(n, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            const double c = dtw_cost(series_set[a], series_set[b], window);
            total[a] += c;
            total[b] += c;
        }
    }
    return static_cast<std::size_t>(std::min_element(total.begin(), total.end()) - total.begin());
}

DbaResult dba(const std::vector<std::vector<double>>& series_set, std::vector<double> init, const DbaOptions& options) {
    if (series_set.empty()) throw ValidationError("dba of an empty set");
    if (init.empty()) init = series_set[dtw_medoid(series_set, options.window)];
    if (!options.weights.empty() && options.weights.size() != init.size()) {
        throw ValidationError("dba weights must match the barycenter length");
    }
    const std::span<const double> weights(options.weights);

    auto align_all = [&](const std::vector<double>& b, std::vector<DtwAlignment>& out) {
        out.clear();
        double total = 0.0;
        for (const auto& s : series_set) {
            out.push_back(dtw_path(s, b, options.window, weights));
            total += out.back().cost;
        }
        return total;
    };

    DbaResult result;
    result.barycenter = std::move(init);
    std::vector<DtwAlignment> alignments;
    double current = align_all(result.barycenter, alignments);
    result.objective.push_back(current);

    std::vector<DtwAlignment> next_alignments;
    for (std::size_t it = 0; it < options.max_iter && current > 0.0; ++it) {
        const std::size_t m = result.barycenter.size();
        std::vector<double> sum(m, 0.0);
        std::vector<std::size_t> count(m, 0);
        for (std::size_t s = 0; s < series_set.size(); ++s) {
            for (const auto& [i, j] : alignments[s].path) {
                sum[j] += series_set[s][i];
                ++count[j];
            }
        }
        std::vector<double> candidate(m);
        for (std::size_t j = 0; j < m; ++j) candidate[j] = sum[j] / static_cast<double>(count[j]);
        const double next = align_all(candidate, next_alignments);
        // Rounding can make a converged update marginally worse; keep the old barycenter then.
        if (next > current) break;
        result.barycenter = std::move(candidate);
        std::swap(alignments, next_alignments);
        result.objective.push_back(next);
        const double improvement = (current - next) / std::max(current, 1e-300);
        current = next;
        if (improvement < options.tol) break;
    }
    return result;
}

DistanceMatrix pairwise_dtw(const std::vector<std::string>& ids, const std::vector<std::vector<double>>& series,
                            std::optional<std::size_t> window) {
    if (ids.size() != series.size()) throw ValidationError("pairwise_dtw: ids and series differ in length");
    DistanceMatrix out{ids, std::vector<std::vector<double>>(series.size(), std::vector<double>(series.size(), 0.0))};
    for (std::size_t a = 0; a < series.size(); ++a) {
        for (std::size_t b = a + 1; b < series.size(); ++b) {
            out.d[a][b] = out.d[b][a] = dtw(series[a], series[b], window);
        }
    }
    return out;
}

} // namespace adcast::clustering

#include "adcast/clustering/tskmeans.hpp"

#include "adcast/clustering/dtw.hpp"
#include "adcast/errors.hpp"
#include "adcast/rng.hpp"
#include "adcast/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace adcast::clustering {

namespace {

using Series = std::vector<double>;

struct State {
    State(const std::vector<Series>& series, const TsKmeansOptions& opts) : x(series), options(opts) {}

    const std::vector<Series>& x;
    const TsKmeansOptions& options;
    double reg = 0.0;
    std::vector<Series> centroids;
    std::vector<Series> weights;
    std::vector<int> labels;
    std::vector<double> cost;

    double point_cost(std::size_t i, std::size_t c) const {
        if (options.weighted) return dtw_cost_weighted(x[i], centroids[c], weights[c], options.window);
        return dtw_cost(x[i], centroids[c], options.window);
    }

    double penalty(std::size_t c) const {
        if (!options.weighted) return 0.0;
        // reg * (sum w^2 - T): zero at uniform weights, so adding a fresh cluster adds no penalty.
        double s = 0.0;
        for (double w : weights[c]) s += w * w - 1.0;
        return reg * s;
    }

    double objective() const {
        double j = 0.0;
        for (double c : cost) j += c;
        for (std::size_t c = 0; c < centroids.size(); ++c) j += penalty(c);
        return j;
    }

    // Returns true when any label changed. Points move only on strict improvement.
    bool assign(bool initial) {
        bool changed = false;
        for (std::size_t i = 0; i < x.size(); ++i) {
            std::size_t best = initial ? 0 : static_cast<std::size_t>(labels[i]);
            double best_cost = point_cost(i, best);
            for (std::size_t c = 0; c < centroids.size(); ++c) {
                if (c == best) continue;
                const double v = point_cost(i, c);
                if (v < best_cost) {
                    best_cost = v;
                    best = c;
                }
            }
            if (labels[i] != static_cast<int>(best)) changed = true;
            labels[i] = static_cast<int>(best);
            cost[i] = best_cost;
        }
        return changed;
    }

    void fill_empty() {
        const std::size_t k = centroids.size();
        std::vector<std::size_t> counts(k, 0);
        for (int l : labels) ++counts[static_cast<std::size_t>(l)];
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t worst = x.size();
            for (std::size_t i = 0; i < x.size(); ++i) {
                if (counts[static_cast<std::size_t>(labels[i])] < 2) continue;
                if (worst == x.size() || cost[i] > cost[worst]) worst = i;
            }
            if (worst == x.size()) return;
            --counts[static_cast<std::size_t>(labels[worst])];
            ++counts[c];
            labels[worst] = static_cast<int>(c);
            centroids[c] = x[worst];
            std::fill(weights[c].begin(), weights[c].end(), 1.0);
            cost[worst] = point_cost(worst, c);
        }
    }

    std::vector<std::size_t> members(std::size_t c) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == static_cast<int>(c)) out.push_back(i);
        }
        return out;
    }

    void update_centroid(std::size_t c) {
        const auto idx = members(c);
        if (idx.empty()) return;
        std::vector<Series> set;
        set.reserve(idx.size());
        for (std::size_t i : idx) set.push_back(x[i]);
        DbaOptions dba_options;
        dba_options.max_iter = options.dba_iter;
        dba_options.window = options.window;
        if (options.weighted) dba_options.weights = weights[c];
        DbaResult r = dba(set, centroids[c], dba_options);
        centroids[c] = std::move(r.barycenter);
        for (std::size_t i : idx) cost[i] = point_cost(i, c);
    }

    // Inverse-variance weights normalised to sum to T; kept only when they lower the cluster's objective.
    void update_weights(std::size_t c) {
        const auto idx = members(c);
        if (idx.empty()) return;
        const std::size_t len = centroids[c].size();
        std::vector<double> v(len, 0.0);
        for (std::size_t i : idx) {
            const DtwAlignment a = dtw_path(x[i], centroids[c], options.window, weights[c]);
            for (const auto& [ti, tj] : a.path) {
                const double d = x[i][ti] - centroids[c][tj];
                v[tj] += d * d;
            }
        }
        std::vector<double> proposal(len);
        double sum = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
            proposal[j] = 1.0 / (v[j] + reg);
            sum += proposal[j];
        }
        for (double& w : proposal) w *= static_cast<double>(len) / sum;

        double before = penalty(c);
        for (std::size_t i : idx) before += cost[i];
        Series old = std::move(weights[c]);
        weights[c] = std::move(proposal);
        std::vector<double> new_cost(idx.size());
        double after = penalty(c);
        for (std::size_t n = 0; n < idx.size(); ++n) {
            new_cost[n] = point_cost(idx[n], c);
            after += new_cost[n];
        }
        if (after <= before) {
            for (std::size_t n = 0; n < idx.size(); ++n) cost[idx[n]] = new_cost[n];
        } else {
            weights[c] = std::move(old);
        }
    }
};

void validate(const std::vector<Series>& x, std::size_t k) {
    if (k == 0) throw ValidationError("k must be >= 1");
    if (x.size() < k) throw ValidationError("k exceeds the number of series");
    for (const auto& s : x) {
        if (s.size() != x.front().size() || s.empty()) throw ValidationError("tskmeans requires equal-length series");
    }
}

// Shrinkage toward uniform weights: the mean per-timestamp variance across the
// whole set, independent of k so objectives stay comparable along the k curve.
// Without it the inverse-variance weights collapse onto the few timestamps
// where members happen to agree.
double regulariser(const std::vector<Series>& x) {
    const std::size_t len = x.front().size();
    double total = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
        double m = 0.0;
        for (const auto& s : x) m += s[t];
        m /= static_cast<double>(x.size());
        for (const auto& s : x) total += (s[t] - m) * (s[t] - m);
    }
    return std::max(total / static_cast<double>(len * x.size()), 1e-12);
}

TsKmeansResult run(const std::vector<Series>& x, std::vector<Series> centroids, std::vector<Series> weights,
                   const TsKmeansOptions& options) {
    State st{x, options};
    st.reg = regulariser(x);
    st.centroids = std::move(centroids);
    st.weights = std::move(weights);
    st.labels.assign(x.size(), 0);
    st.cost.assign(x.size(), 0.0);

    TsKmeansResult r;
    st.assign(true);
    st.fill_empty();
    r.objective_history.push_back(st.objective());
    for (std::size_t it = 0; it < options.max_iter; ++it) {
        for (std::size_t c = 0; c < st.centroids.size(); ++c) {
            st.update_centroid(c);
            if (options.weighted) st.update_weights(c);
        }
        const bool changed = st.assign(false);
        st.fill_empty();
        r.objective_history.push_back(st.objective());
        ++r.iterations;
        if (!changed) break;
    }
    r.labels = std::move(st.labels);
    r.objective = r.objective_history.back();
    r.centroids = std::move(st.centroids);
    r.weights = std::move(st.weights);
    return r;
}

// Seeding in the k-means++ manner under DTW cost.
std::vector<Series> seed_centroids(const std::vector<Series>& x, std::size_t k, Rng& rng,
                                   std::optional<std::size_t> window) {
    std::vector<Series> c{x[rng.index(x.size())]};
    std::vector<double> d(x.size(), std::numeric_limits<double>::infinity());
    while (c.size() < k) {
        double sum = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            d[i] = std::min(d[i], dtw_cost(x[i], c.back(), window));
            sum += d[i];
        }
        std::size_t pick = static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
        if (sum > 0.0) {
            double u = rng.uniform() * sum;
            for (std::size_t i = 0; i < x.size(); ++i) {
                u -= d[i];
                if (u < 0.0 && d[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        }
        c.push_back(x[pick]);
    }
    return c;
}

} // namespace

TsKmeansResult tskmeans_from(const std::vector<std::vector<double>>& series_set,
                             std::vector<std::vector<double>> centroids, const TsKmeansOptions& options) {
    validate(series_set, centroids.size());
    for (const auto& c : centroids) {
        if (c.size() != series_set.front().size()) throw ValidationError("centroid length mismatch");
    }
    std::vector<Series> weights(centroids.size(), Series(series_set.front().size(), 1.0));
    return run(series_set, std::move(centroids), std::move(weights), options);
}

TsKmeansResult tskmeans(const std::vector<std::vector<double>>& series_set, std::size_t k, std::uint64_t seed,
                        const TsKmeansOptions& options) {
    validate(series_set, k);
    TsKmeansResult best;
    bool have = false;
    for (std::size_t run_idx = 0; run_idx < std::max<std::size_t>(1, options.n_init); ++run_idx) {
        Rng rng = Rng::substream(seed, run_idx);
        TsKmeansResult r = tskmeans_from(series_set, seed_centroids(series_set, k, rng, options.window), options);
        if (!have || r.objective < best.objective) {
            best = std::move(r);
            have = true;
        }
    }
    return best;
}

TsKmeansCurve tskmeans_curve(const std::vector<std::vector<double>>& series_set, std::size_t k_min, std::size_t k_max,
                             std::uint64_t seed, const TsKmeansOptions& options) {
    if (k_min == 0 || k_min > k_max) throw ValidationError("invalid k range");
    validate(series_set, k_max);
    TsKmeansCurve curve;
    for (std::size_t k = k_min; k <= k_max; ++k) {
        TsKmeansResult r = tskmeans(series_set, k, seed + k, options);
        if (k > k_min) {
            // Warm start: previous solution plus its worst-fit series as a new centre.
            const TsKmeansResult& prev = curve.results.at(k - 1);
            State probe{series_set, options};
            probe.centroids = prev.centroids;
            probe.weights = prev.weights;
            std::size_t worst = 0;
            double worst_cost = -1.0;
            for (std::size_t i = 0; i < series_set.size(); ++i) {
                const double c = probe.point_cost(i, static_cast<std::size_t>(prev.labels[i]));
                if (c > worst_cost) {
                    worst_cost = c;
                    worst = i;
                }
            }
            auto centroids = prev.centroids;
            auto weights = prev.weights;
            centroids.push_back(series_set[worst]);
            weights.emplace_back(series_set.front().size(), 1.0);
            TsKmeansResult warm = run(series_set, std::move(centroids), std::move(weights), options);
            if (warm.objective < r.objective) r = std::move(warm);
        }
        curve.objective_by_k[k] = r.objective;
        curve.results.emplace(k, std::move(r));
    }
    return curve;
}

} // namespace adcast::clustering

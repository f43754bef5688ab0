#include "adcast/clustering/assignment.hpp"

#include "adcast/clustering/kmeans.hpp"
#include "adcast/clustering/tskmeans.hpp"
#include "adcast/errors.hpp"
#include "adcast/stats.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace adcast::clustering {

std::string to_string(ClusterMethod m) {
    switch (m) {
    case ClusterMethod::category: return "category";
    case ClusterMethod::extracted: return "extracted";
    case ClusterMethod::distance: return "distance";
    }
    return "category";
}

ClusterMethod parse_cluster_method(const std::string& s) {
    if (s == "category" || s == "cat") return ClusterMethod::category;
    if (s == "extracted" || s == "extr") return ClusterMethod::extracted;
    if (s == "distance" || s == "dist") return ClusterMethod::distance;
    throw ValidationError("unknown cluster method '" + s + "'");
}

int ClusterAssignment::label_of(const std::string& id) const {
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] == id) return labels[i];
    }
    throw NotFoundError("advertiser '" + id + "' has no cluster label");
}

std::vector<std::string> ClusterAssignment::members(int label) const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (labels[i] == label) out.push_back(ids[i]);
    }
    return out;
}

void to_json(nlohmann::json& j, const ClusterAssignment& a) {
    j = nlohmann::json::object();
    j["method"] = to_string(a.method);
    j["k"] = a.k;
    auto labels = nlohmann::json::object();
    for (std::size_t i = 0; i < a.ids.size(); ++i) labels[a.ids[i]] = a.labels[i];
    j["labels"] = labels;
    auto wcss = nlohmann::json::object();
    for (const auto& [k, v] : a.wcss_by_k) wcss[std::to_string(k)] = v;
    j["wcss_by_k"] = wcss;
    if (!a.cluster_names.empty()) j["cluster_names"] = a.cluster_names;
    if (a.centroids) j["centroids"] = *a.centroids;
    if (a.timestamp_weights) j["timestamp_weights"] = *a.timestamp_weights;
    if (a.window) j["window"] = {{"first", format_date(a.window->first)}, {"last", format_date(a.window->last)}};
}

void from_json(const nlohmann::json& j, ClusterAssignment& a) {
    try {
        a = ClusterAssignment{};
        a.method = parse_cluster_method(j.at("method").get<std::string>());
        a.k = j.at("k").get<std::size_t>();
        for (const auto& [id, label] : j.at("labels").items()) {
            a.ids.push_back(id);
            a.labels.push_back(label.get<int>());
        }
        if (j.contains("wcss_by_k")) {
            for (const auto& [k, v] : j.at("wcss_by_k").items()) a.wcss_by_k[std::stoul(k)] = v.get<double>();
        }
        if (j.contains("cluster_names")) a.cluster_names = j.at("cluster_names").get<std::vector<std::string>>();
        if (j.contains("centroids")) a.centroids = j.at("centroids").get<std::vector<std::vector<double>>>();
        if (j.contains("timestamp_weights")) {
            a.timestamp_weights = j.at("timestamp_weights").get<std::vector<std::vector<double>>>();
        }
        if (j.contains("window")) {
            a.window = DateRange{parse_date(j.at("window").at("first").get<std::string>()),
                                 parse_date(j.at("window").at("last").get<std::string>())};
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed cluster assignment: ") + e.what());
    }
    for (int l : a.labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= a.k) throw ValidationError("cluster label outside [0, k)");
    }
}

ClusterAssignment category_clusters(const PanelDataset& panel) {
    ClusterAssignment a;
    a.method = ClusterMethod::category;
    a.cluster_names.assign(panel.categories().begin(), panel.categories().end());
    a.k = a.cluster_names.size();
    for (const auto& s : panel.advertisers()) {
        a.ids.push_back(s.advertiser_id);
        const auto it = std::lower_bound(a.cluster_names.begin(), a.cluster_names.end(), s.category);
        a.labels.push_back(static_cast<int>(it - a.cluster_names.begin()));
    }
    return a;
}

namespace {

double choose2(double n) { return n * (n - 1.0) / 2.0; }

std::vector<int> densify(const std::vector<int>& labels, std::size_t& k) {
    std::unordered_map<int, int> map;
    std::vector<int> out;
    out.reserve(labels.size());
    std::vector<int> sorted = labels;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) map[sorted[i]] = static_cast<int>(i);
    for (int l : labels) out.push_back(map[l]);
    k = sorted.size();
    return out;
}

std::vector<std::vector<std::size_t>> contingency_table(const std::vector<int>& a, std::size_t ka,
                                                        const std::vector<int>& b, std::size_t kb) {
    std::vector<std::vector<std::size_t>> t(ka, std::vector<std::size_t>(kb, 0));
    for (std::size_t i = 0; i < a.size(); ++i) ++t[static_cast<std::size_t>(a[i])][static_cast<std::size_t>(b[i])];
    return t;
}

double ari_from_table(const std::vector<std::vector<std::size_t>>& t, std::size_t n) {
    double index = 0.0, sum_a = 0.0, sum_b = 0.0;
    std::vector<double> col(t.empty() ? 0 : t.front().size(), 0.0);
    for (const auto& row : t) {
        double r = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            index += choose2(static_cast<double>(row[j]));
            r += static_cast<double>(row[j]);
            col[j] += static_cast<double>(row[j]);
        }
        sum_a += choose2(r);
    }
    for (double c : col) sum_b += choose2(c);
    const double total = choose2(static_cast<double>(n));
    if (total == 0.0) return 1.0;
    const double expected = sum_a * sum_b / total;
    const double max_index = 0.5 * (sum_a + sum_b);
    // Both partitions trivial (all one cluster or all singletons): identical partitions by convention.
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

} // namespace

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw ValidationError("label vectors differ in length");
    std::size_t ka = 0, kb = 0;
    const auto da = densify(a, ka);
    const auto db = densify(b, kb);
    return ari_from_table(contingency_table(da, ka, db, kb), a.size());
}

AssignmentComparison compare_assignments(const ClusterAssignment& a, const ClusterAssignment& b) {
    if (a.ids.size() != b.ids.size()) throw ValidationError("assignments cover different advertiser sets");
    std::unordered_map<std::string, int> b_label;
    for (std::size_t i = 0; i < b.ids.size(); ++i) b_label[b.ids[i]] = b.labels[i];
    std::vector<int> aligned;
    aligned.reserve(a.ids.size());
    for (const auto& id : a.ids) {
        const auto it = b_label.find(id);
        if (it == b_label.end()) throw ValidationError("assignments cover different advertiser sets: '" + id + "'");
        aligned.push_back(it->second);
    }
    const std::size_t ka = std::max<std::size_t>(a.k, a.labels.empty() ? 0 : static_cast<std::size_t>(*std::max_element(a.labels.begin(), a.labels.end())) + 1);
    const std::size_t kb = std::max<std::size_t>(b.k, aligned.empty() ? 0 : static_cast<std::size_t>(*std::max_element(aligned.begin(), aligned.end())) + 1);
    AssignmentComparison out;
    out.contingency = contingency_table(a.labels, ka, aligned, kb);
    out.ari = ari_from_table(out.contingency, a.ids.size());
    return out;
}

std::vector<double> clustering_series(const AdvertiserSeries& s, std::size_t begin, std::size_t end,
                                      const ClusteringOptions& options) {
    if (begin >= end || end > s.size()) throw ValidationError("clustering window outside the series");
    std::span<const double> cpc(s.cpc.data() + begin, end - begin);
    if (options.smooth && options.smoothing_window > 1) {
        if (cpc.size() < options.smoothing_window) throw ValidationError("clustering window shorter than the smoother");
        return stats::zscore(stats::moving_average(cpc, options.smoothing_window));
    }
    return stats::zscore(cpc);
}

namespace {

std::pair<std::size_t, std::size_t> window_offsets(const PanelDataset& panel, const DateRange& window) {
    if (panel.empty()) throw ValidationError("cannot cluster an empty panel");
    if (window.first < panel.start() || window.last > panel.range().last || window.length() <= 0) {
        throw ValidationError("clustering window outside the panel range");
    }
    return {static_cast<std::size_t>(days_between(panel.start(), window.first)),
            static_cast<std::size_t>(days_between(panel.start(), window.last))};
}

// Elbow over [k_min, k_hi] when the curve has an interior point, else a fixed small k.
std::size_t choose_k(const std::map<std::size_t, double>& curve, std::size_t k_min, std::size_t k_hi) {
    if (k_hi >= k_min + 2) return elbow(curve, k_min, k_hi);
    return std::min(k_min, k_hi);
}

} // namespace

ClusterAssignment extracted_clusters(const PanelDataset& panel, const DateRange& window, const ClusteringOptions& options) {
    const auto [begin, end] = window_offsets(panel, window);
    if (panel.size() < 2) throw ValidationError("extracted-feature clustering needs at least two advertisers");
    std::vector<FeatureVector14> features;
    for (const auto& s : panel.advertisers()) {
        features.push_back(extract_features(std::span<const double>(s.cpc).subspan(begin, end - begin)));
    }
    const Matrix points = znormalize(feature_matrix(features));

    ClusterAssignment a;
    a.method = ClusterMethod::extracted;
    a.window = window;
    KmeansResult result;
    if (options.k) {
        result = kmeans(points, *options.k, options.seed);
        a.wcss_by_k[*options.k] = result.wcss;
    } else {
        const std::size_t k_hi = std::min(options.k_max, panel.size());
        const std::size_t k_lo = std::min(options.k_min, k_hi);
        KmeansCurve curve = kmeans_curve(points, k_lo, k_hi, options.seed);
        a.wcss_by_k = curve.wcss_by_k;
        result = std::move(curve.results.at(choose_k(curve.wcss_by_k, k_lo, k_hi)));
    }
    a.k = result.centroids.rows();
    a.labels = result.labels;
    std::vector<std::vector<double>> centroids;
    for (std::size_t c = 0; c < result.centroids.rows(); ++c) {
        centroids.emplace_back(result.centroids.row(c).begin(), result.centroids.row(c).end());
    }
    a.centroids = std::move(centroids);
    for (const auto& s : panel.advertisers()) a.ids.push_back(s.advertiser_id);
    return a;
}

ClusterAssignment distance_clusters(const PanelDataset& panel, const DateRange& window, const ClusteringOptions& options) {
    const auto [begin, end] = window_offsets(panel, window);
    std::vector<std::vector<double>> series;
    for (const auto& s : panel.advertisers()) series.push_back(clustering_series(s, begin, end, options));

    // k is chosen on the unweighted objective: the weighted one adapts its
    // metric per cluster, which flattens the curve and hides the elbow.
    TsKmeansOptions ts;
    ts.window = options.dtw_window;
    ClusterAssignment a;
    a.method = ClusterMethod::distance;
    a.window = window;
    TsKmeansResult result;
    if (options.k) {
        result = tskmeans(series, *options.k, options.seed, ts);
        a.wcss_by_k[*options.k] = result.objective;
    } else {
        const std::size_t k_hi = std::min(options.k_max, panel.size());
        const std::size_t k_lo = std::min(options.k_min, k_hi);
        TsKmeansCurve curve = tskmeans_curve(series, k_lo, k_hi, options.seed, ts);
        a.wcss_by_k = curve.objective_by_k;
        result = std::move(curve.results.at(choose_k(curve.objective_by_k, k_lo, k_hi)));
    }
    if (options.weighted) {
        ts.weighted = true;
        result = tskmeans_from(series, std::move(result.centroids), ts);
    }
    a.k = result.centroids.size();
    a.labels = result.labels;
    a.centroids = result.centroids;
    if (options.weighted) a.timestamp_weights = result.weights;
    for (const auto& s : panel.advertisers()) a.ids.push_back(s.advertiser_id);
    return a;
}

ClusterAssignment cluster_panel(const PanelDataset& panel, ClusterMethod method, const DateRange& window,
                                const ClusteringOptions& options) {
    switch (method) {
    case ClusterMethod::category: {
        ClusterAssignment a = category_clusters(panel);
        a.window = window;
        return a;
    }
    case ClusterMethod::extracted: return extracted_clusters(panel, window, options);
    case ClusterMethod::distance: return distance_clusters(panel, window, options);
    }
    throw ValidationError("unknown cluster method");
}

} // namespace adcast::clustering

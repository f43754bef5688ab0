#pragma once

#include "adcast/clustering/dtw.hpp"
#include "adcast/clustering/features.hpp"
#include "adcast/date.hpp"
#include "adcast/panel/panel.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace adcast::clustering {

enum class ClusterMethod { category, extracted, distance };

std::string to_string(ClusterMethod m);
/// Accepts "category"/"cat", "extracted"/"extr", "distance"/"dist".
ClusterMethod parse_cluster_method(const std::string& s);

struct ClusterAssignment {
    ClusterMethod method = ClusterMethod::category;
    std::size_t k = 0;
    std::vector<std::string> ids;
    std::vector<int> labels;  // parallel to ids, dense in [0, k)
    std::optional<std::vector<std::vector<double>>> centroids;
    std::optional<std::vector<std::vector<double>>> timestamp_weights;
    std::map<std::size_t, double> wcss_by_k;
    /// Category names for method == category, indexed by label.
    std::vector<std::string> cluster_names;
    std::optional<DateRange> window;

    int label_of(const std::string& id) const;
    std::vector<std::string> members(int label) const;
};

void to_json(nlohmann::json& j, const ClusterAssignment& a);
void from_json(const nlohmann::json& j, ClusterAssignment& a);

/// One cluster per distinct category, labels in lexicographic category order.
ClusterAssignment category_clusters(const PanelDataset& panel);

struct AssignmentComparison {
    double ari = 0.0;
    std::vector<std::vector<std::size_t>> contingency;  // k_a x k_b
};

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

/// Throws ValidationError when the advertiser sets differ.
AssignmentComparison compare_assignments(const ClusterAssignment& a, const ClusterAssignment& b);

struct ClusteringOptions {
    std::size_t k_min = 2;
    std::size_t k_max = 12;
    std::uint64_t seed = 0;
    /// 7-day trailing moving average before distance computation; false uses raw CPC.
    bool smooth = true;
    std::size_t smoothing_window = 7;
    /// Per-timestamp weights in the final TSkmeans pass; k is always chosen on the unweighted curve.
    bool weighted = true;
    std::optional<std::size_t> dtw_window = 28;
    /// Fixed k instead of the elbow.
    std::optional<std::size_t> k;
};

/// CPC over [range.first, range.last) of one advertiser, smoothed and z-normalised for distance clustering.
std::vector<double> clustering_series(const AdvertiserSeries& s, std::size_t begin, std::size_t end,
                                      const ClusteringOptions& options);

/// Extracted-feature clustering: 14 features per CPC series, z-normalised, k-means with elbow.
ClusterAssignment extracted_clusters(const PanelDataset& panel, const DateRange& window, const ClusteringOptions& options);

/// Distance clustering: TSkmeans under DTW with elbow.
ClusterAssignment distance_clusters(const PanelDataset& panel, const DateRange& window, const ClusteringOptions& options);

ClusterAssignment cluster_panel(const PanelDataset& panel, ClusterMethod method, const DateRange& window,
                                const ClusteringOptions& options);

} // namespace adcast::clustering

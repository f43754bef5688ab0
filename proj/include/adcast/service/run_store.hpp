#pragma once

#include "adcast/clustering/assignment.hpp"
#include "adcast/models/model.hpp"
#include "adcast/panel/panel.hpp"
#include "adcast/pipeline/backtest.hpp"
#include "adcast/simgen/simgen.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace adcast::service {

/// Settings shared by every stage of a run; persisted as config.json.
struct RunConfig {
    std::uint64_t seed = 7;
    std::vector<std::size_t> horizons{14, 30, 60};
    std::size_t encoder_length = 90;
    /// Forecast origin for training, backtest and the service; defaults to
    /// the panel end minus the longest horizon.
    std::optional<Date> origin;
    std::size_t parallelism = 1;
    clustering::ClusteringOptions clustering;
    /// Present for simulated runs; needed by the robustness experiment.
    std::optional<sim::MarketConfig> simulation;
    /// Model used by the robustness experiment (multivar vs comp.dist).
    models::ModelConfig robustness_model;

    void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

/// 64-bit FNV-1a, rendered as 16 hex digits. Stable across platforms.
std::string fingerprint(std::string_view bytes);

/// Every trained horizon of one (advertiser, config tag); one file per pair.
struct ModelBundle {
    std::string advertiser_id;
    std::string config_tag;
    pipeline::CompositionKind composition;
    Date origin{};
    std::map<std::size_t, models::TrainedModel> models;  // by horizon

    const models::TrainedModel& at(std::size_t horizon) const;
};

void to_json(nlohmann::json& j, const ModelBundle& b);
void from_json(const nlohmann::json& j, ModelBundle& b);

/// A run directory:
///   manifest.json  run id, config hash, dataset fingerprint, creation time
///   config.json    RunConfig
///   dataset.csv    the prepared panel
///   ground_truth.json (simulated runs only)
///   clusters.json  assignments keyed by method name
///   models/<advertiser>/<config-tag>.json, models/grid.json
///   reports/       backtest.csv, summary.csv, backtest.json, robustness.csv
class RunStore {
public:
    /// Creates the directory (which must be absent or empty) with config, dataset and manifest.
    static RunStore create(const std::filesystem::path& root, const RunConfig& config, const PanelDataset& panel,
                           const std::optional<sim::GroundTruth>& truth = std::nullopt);
    /// Opens an existing run; throws ValidationError when the manifest no
    /// longer matches config.json or dataset.csv.
    static RunStore open(const std::filesystem::path& root);

    const std::filesystem::path& root() const { return root_; }
    const std::string& run_id() const { return run_id_; }
    const RunConfig& config() const { return config_; }
    const PanelDataset& panel() const { return panel_; }
    const std::optional<sim::GroundTruth>& truth() const { return truth_; }
    /// config.origin or the default origin for the configured horizons.
    Date origin() const;
    /// The window clusters are computed on: panel start up to the origin.
    DateRange training_window() const;

    pipeline::ClusterSet clusters() const;
    /// Adds or replaces the assignment for its method.
    void save_clusters(const clustering::ClusterAssignment& assignment) const;

    std::filesystem::path model_path(const std::string& advertiser_id, const std::string& config_tag) const;
    void save_bundle(const ModelBundle& bundle) const;
    ModelBundle load_bundle(const std::string& advertiser_id, const std::string& config_tag) const;
    /// Config tags with a stored bundle, per advertiser.
    std::map<std::string, std::vector<std::string>> model_index() const;
    void save_grid(const std::vector<pipeline::GridEntry>& grid) const;
    std::vector<pipeline::GridEntry> grid() const;

    std::filesystem::path reports_dir() const;

private:
    std::filesystem::path root_;
    std::string run_id_;
    RunConfig config_;
    PanelDataset panel_;
    std::optional<sim::GroundTruth> truth_;
};

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary file and a rename so readers never see partial content.
void write_file(const std::filesystem::path& path, std::string_view content);

} // namespace adcast::service

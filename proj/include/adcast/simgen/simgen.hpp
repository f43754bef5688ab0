#pragma once

#include "adcast/date.hpp"
#include "adcast/panel/panel.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace adcast::sim {

struct SpecialDay {
    int doy = 358;
    double multiplier = 1.5;
};

/// Market-wide disruption applied to selected categories from `date` onward.
struct ShockConfig {
    Date date{};
    std::vector<std::string> affected_categories;
    double budget_multiplier = 0.7;
    double cpc_multiplier = 0.6;
    /// e-folding times of the recovery back toward 1 (days).
    double budget_recovery_days = 120.0;
    double cpc_recovery_days = 720.0;
    /// Idiosyncratic noise inflation right after the shock, decaying over `cpc_recovery_days / 4`.
    double volatility_multiplier = 2.0;
};

/// Offsets (in calendar months relative to the shock month) of the three
/// two-month evaluation windows.
struct ShockWindowOffsets {
    int pre_start = -6;
    int post1_start = 2;
    int post2_start = 6;
    int length_months = 2;
};

struct MarketConfig {
    int n_advertisers = 20;
    int n_clusters = 4;
    int n_days = 1100;
    Date start_date = parse_date("2019-01-01");
    std::uint64_t seed = 7;

    /// CPC response to the advertiser's budget: cpc ∝ budget^budget_elasticity.
    double budget_elasticity = -0.3;
    /// Click response to budget: clicks ∝ budget^click_elasticity.
    double click_elasticity = 0.9;
    std::pair<double, double> weekly_amp_range{0.05, 0.25};
    std::vector<SpecialDay> special_days{{358, 1.5}, {359, 1.5}};
    std::optional<ShockConfig> shock;
    double noise_scale = 1.0;

    /// Cluster latent AR(1) on the log scale.
    double latent_phi = 0.985;
    double latent_sigma = 0.045;
    /// Largest delay (days) with which an advertiser follows its cluster's latent level.
    int max_follow_lag = 21;
    /// Monthly probability of a budget regime change and its log-scale size.
    double budget_change_prob = 0.6;
    double budget_change_sigma = 0.6;
    /// Probability that an advertiser's category differs from its cluster's home category.
    double category_mix = 0.1;
    /// Noise scales, multiplied by noise_scale.
    double cpc_noise = 0.06;
    double click_noise = 0.25;
    double ctr_noise = 0.08;
    ShockWindowOffsets window_offsets{};

    /// Throws ValidationError listing every violated field.
    void validate() const;
};

struct GroundTruth {
    std::map<std::string, int> cluster_of;
    std::optional<Date> shock_date;
    std::map<std::string, int> elasticity_sign;
};

struct SimulationResult {
    PanelDataset panel;
    GroundTruth truth;
};

/// Deterministic function of the config: equal configs give bit-identical panels.
/// The returned panel is fully derived (cpc, adbudget, lag7_cpc populated).
SimulationResult simulate(const MarketConfig& config);

struct CalibrationReport {
    /// Mean over advertisers of Pearson corr(daily clicks, monthly budget).
    std::optional<double> corr_clicks_budget;
    std::optional<double> corr_impressions_budget;
    /// Advertisers whose clicks or budget channel is constant.
    std::size_t undefined_count = 0;
    bool undefined = false;
    /// Seasonal strength (period 7) of each advertiser's CPC.
    std::vector<double> weekly_strength;
};

CalibrationReport validate_calibration(const PanelDataset& panel);

struct ShockWindows {
    DateRange pre;
    DateRange post1;
    DateRange post2;
};

/// Two-month evaluation windows around the configured shock.
ShockWindows shock_windows(const MarketConfig& config);

void to_json(nlohmann::json& j, const MarketConfig& c);
void from_json(const nlohmann::json& j, MarketConfig& c);
void to_json(nlohmann::json& j, const GroundTruth& g);
void from_json(const nlohmann::json& j, GroundTruth& g);

} // namespace adcast::sim

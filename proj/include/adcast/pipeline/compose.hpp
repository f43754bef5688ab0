#pragma once

#include "adcast/clustering/assignment.hpp"
#include "adcast/models/model.hpp"
#include "adcast/panel/panel.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace adcast::pipeline {

enum class Composition { univar, multivar, comp_cat, comp_extr, comp_dist };

/// "univar", "multivar", "multivar.comp.cat", "multivar.comp.extr", "multivar.comp.dist".
std::string to_string(Composition c);
Composition parse_composition(const std::string& s);
bool is_competition(Composition c);
/// Cluster method a competition composition draws peers from.
clustering::ClusterMethod required_method(Composition c);

struct CompositionKind {
    Composition tag = Composition::univar;
    /// Peer CPC channels added by competition compositions.
    std::size_t peer_limit = 5;
    /// The cluster-mean channel; disabling it is only useful for plumbing checks.
    bool cluster_mean = true;
};

/// Builds the model input for one advertiser with history [window.first, origin)
/// and `horizon` known-future days after it.
///
/// Past channels: cpc and lag7_cpc; multivar adds adcost, adclicks,
/// impressions and adbudget; competition kinds add up to `peer_limit` peer
/// CPC channels ("peer_<id>") and "cluster_mean_cpc". Known variables:
/// adbudget (multivar and up), dow one-hot, month one-hot, day-of-year sin/cos.
/// The history never starts inside the lag-7 warm-up. Known budget days past
/// the panel end carry the last observed month forward.
models::ModelInput compose(const PanelDataset& panel, const std::string& advertiser_id, const CompositionKind& kind,
                           const clustering::ClusterAssignment* clusters, const DateRange& history, std::size_t horizon,
                           std::uint64_t seed = 0);

/// Peers of `advertiser_id` inside its cluster: nearest by DTW on the
/// clustering series over the history window, or seeded random draws for the
/// category method. Never contains the advertiser itself.
std::vector<std::string> select_peers(const PanelDataset& panel, const std::string& advertiser_id,
                                      const clustering::ClusterAssignment& clusters, const DateRange& history,
                                      std::size_t limit, std::uint64_t seed = 0);

/// Replaces the future rows of the known adbudget variable.
/// Throws ValidationError "model has no budget channel" when absent.
void set_budget_plan(models::ModelInput& input, const std::vector<double>& plan);
/// The current future rows of the known adbudget variable.
std::vector<double> budget_plan(const models::ModelInput& input);

} // namespace adcast::pipeline

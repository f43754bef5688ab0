#include "adcast/pipeline/compose.hpp"

#include "adcast/clustering/dtw.hpp"
#include "adcast/errors.hpp"
#include "adcast/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace adcast::pipeline {

using clustering::ClusterAssignment;
using clustering::ClusterMethod;
using models::KnownVariable;
using models::ModelInput;

std::string to_string(Composition c) {
    switch (c) {
    case Composition::univar: return "univar";
    case Composition::multivar: return "multivar";
    case Composition::comp_cat: return "multivar.comp.cat";
    case Composition::comp_extr: return "multivar.comp.extr";
    case Composition::comp_dist: return "multivar.comp.dist";
    }
    return "univar";
}

Composition parse_composition(const std::string& s) {
    if (s == "univar") return Composition::univar;
    if (s == "multivar") return Composition::multivar;
    if (s == "multivar.comp.cat" || s == "comp.cat") return Composition::comp_cat;
    if (s == "multivar.comp.extr" || s == "comp.extr") return Composition::comp_extr;
    if (s == "multivar.comp.dist" || s == "comp.dist") return Composition::comp_dist;
    throw ValidationError("unknown composition '" + s + "'");
}

bool is_competition(Composition c) {
    return c == Composition::comp_cat || c == Composition::comp_extr || c == Composition::comp_dist;
}

ClusterMethod required_method(Composition c) {
    switch (c) {
    case Composition::comp_cat: return ClusterMethod::category;
    case Composition::comp_extr: return ClusterMethod::extracted;
    case Composition::comp_dist: return ClusterMethod::distance;
    default: throw ValidationError("composition " + to_string(c) + " uses no clusters");
    }
}

namespace {

std::size_t day_offset(const PanelDataset& panel, Date d) {
    const long off = days_between(panel.start(), d);
    if (off < 0 || off > static_cast<long>(panel.n_days())) {
        throw ValidationError("date " + format_date(d) + " lies outside the panel range");
    }
    return static_cast<std::size_t>(off);
}

} // namespace

std::vector<std::string> select_peers(const PanelDataset& panel, const std::string& advertiser_id,
                                      const ClusterAssignment& clusters, const DateRange& history,
                                      std::size_t limit, std::uint64_t seed) {
    const int label = clusters.label_of(advertiser_id);
    std::vector<std::string> candidates;
    for (const auto& id : clusters.members(label)) {
        if (id != advertiser_id && panel.find(id)) candidates.push_back(id);
    }
    std::sort(candidates.begin(), candidates.end());
    if (limit == 0 || candidates.empty()) return {};
    if (clusters.method == ClusterMethod::category) {
        Rng rng = Rng::substream(seed, *panel.index_of(advertiser_id));
        rng.shuffle(candidates);
        candidates.resize(std::min(limit, candidates.size()));
        return candidates;
    }
    const std::size_t begin = day_offset(panel, history.first), end = day_offset(panel, history.last);
    const clustering::ClusteringOptions opts;
    const auto self = clustering::clustering_series(panel.at(advertiser_id), begin, end, opts);
    std::vector<std::pair<double, std::string>> ranked;
    for (const auto& id : candidates) {
        const auto other = clustering::clustering_series(panel.at(id), begin, end, opts);
        ranked.emplace_back(clustering::dtw_cost(self, other, opts.dtw_window), id);
    }
    std::sort(ranked.begin(), ranked.end());
    std::vector<std::string> out;
    for (std::size_t i = 0; i < std::min(limit, ranked.size()); ++i) out.push_back(ranked[i].second);
    return out;
}

ModelInput compose(const PanelDataset& panel, const std::string& advertiser_id, const CompositionKind& kind,
                   const ClusterAssignment* clusters, const DateRange& history, std::size_t horizon,
                   std::uint64_t seed) {
    const AdvertiserSeries& s = panel.at(advertiser_id);
    if (is_competition(kind.tag)) {
        if (!clusters) throw ValidationError("composition " + to_string(kind.tag) + " needs a cluster assignment");
        if (clusters->method != required_method(kind.tag)) {
            throw ValidationError("composition " + to_string(kind.tag) + " needs " +
                                  clustering::to_string(required_method(kind.tag)) + " clusters, got " +
                                  clustering::to_string(clusters->method));
        }
    }
    const std::size_t begin = std::max(day_offset(panel, history.first), kLagWarmup);
    const std::size_t end = day_offset(panel, history.last);
    if (end <= begin) {
        throw ValidationError("history window " + format_date(history.first) + " .. " + format_date(history.last) +
                              " is empty after the lag warm-up");
    }
    const std::size_t t_len = end - begin;

    ModelInput in;
    in.advertiser_id = advertiser_id;
    in.start = panel.calendar().start + std::chrono::days{static_cast<long>(begin)};
    in.horizon = horizon;

    std::vector<const std::vector<double>*> channels{&s.cpc, &s.lag7_cpc};
    in.past_names = {"cpc", "lag7_cpc"};
    const bool multivar = kind.tag != Composition::univar;
    if (multivar) {
        channels.insert(channels.end(), {&s.adcost, &s.adclicks, &s.impressions, &s.adbudget});
        in.past_names.insert(in.past_names.end(), {"adcost", "adclicks", "impressions", "adbudget"});
    }
    std::vector<double> cluster_mean;
    if (is_competition(kind.tag)) {
        const auto peers = select_peers(panel, advertiser_id, *clusters, {in.start, history.last}, kind.peer_limit, seed);
        for (const auto& id : peers) {
            channels.push_back(&panel.at(id).cpc);
            in.past_names.push_back("peer_" + id);
        }
        if (kind.cluster_mean) {
            const auto members = clusters->members(clusters->label_of(advertiser_id));
            cluster_mean.assign(panel.n_days(), 0.0);
            std::size_t n = 0;
            for (const auto& id : members) {
                const auto* m = panel.find(id);
                if (!m) continue;
                for (std::size_t t = 0; t < cluster_mean.size(); ++t) cluster_mean[t] += m->cpc[t];
                ++n;
            }
            for (double& v : cluster_mean) v /= static_cast<double>(n);
            in.degraded = n <= 1;
            channels.push_back(&cluster_mean);
            in.past_names.push_back("cluster_mean_cpc");
        } else {
            in.degraded = peers.empty();
        }
    }
    in.past = Matrix(t_len, channels.size());
    for (std::size_t c = 0; c < channels.size(); ++c) {
        for (std::size_t t = 0; t < t_len; ++t) in.past(t, c) = (*channels[c])[begin + t];
    }

    std::size_t width = 0;
    if (multivar) {
        in.known_vars.push_back({"adbudget", width, 1, true});
        width += 1;
    }
    in.known_vars.push_back({"dow", width, 7, false});
    width += 7;
    in.known_vars.push_back({"month", width, 12, false});
    width += 12;
    in.known_vars.push_back({"doy", width, 2, false});
    width += 2;
    in.known = Matrix(t_len + horizon, width);
    const double last_budget = s.adbudget.back();
    for (std::size_t t = 0; t < t_len + horizon; ++t) {
        const std::size_t day = begin + t;
        const Date d = add_days(in.start, static_cast<long>(t));
        std::size_t col = 0;
        if (multivar) in.known(t, col++) = day < s.size() ? s.adbudget[day] : last_budget;
        in.known(t, col + static_cast<std::size_t>(day_of_week(d))) = 1.0;
        col += 7;
        in.known(t, col + static_cast<std::size_t>(month_of(d) - 1)) = 1.0;
        col += 12;
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(day_of_year(d) - 1) / 365.25;
        in.known(t, col) = std::sin(angle);
        in.known(t, col + 1) = std::cos(angle);
    }

    in.static_names.reserve(panel.categories().size());
    for (const auto& c : panel.categories()) {
        in.static_names.push_back("category=" + c);
        in.static_values.push_back(c == s.category ? 1.0 : 0.0);
    }
    in.validate();
    return in;
}

void set_budget_plan(ModelInput& input, const std::vector<double>& plan) {
    const auto var = input.budget_variable();
    if (!var) throw ValidationError("model has no budget channel");
    if (plan.size() != input.horizon) {
        throw ValidationError("budget plan has " + std::to_string(plan.size()) + " days, horizon is " +
                              std::to_string(input.horizon));
    }
    const std::size_t col = input.known_vars[*var].begin;
    for (std::size_t h = 0; h < plan.size(); ++h) {
        if (!std::isfinite(plan[h])) throw ValidationError("budget plan contains a non-finite amount");
        input.known(input.history() + h, col) = plan[h];
    }
}

std::vector<double> budget_plan(const ModelInput& input) {
    const auto var = input.budget_variable();
    if (!var) throw ValidationError("model has no budget channel");
    std::vector<double> out(input.horizon);
    for (std::size_t h = 0; h < input.horizon; ++h) out[h] = input.known(input.history() + h, input.known_vars[*var].begin);
    return out;
}

} // namespace adcast::pipeline

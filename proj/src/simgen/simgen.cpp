#include "adcast/simgen/simgen.hpp"

#include "adcast/clustering/features.hpp"
#include "adcast/errors.hpp"
#include "adcast/rng.hpp"
#include "adcast/stats.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

namespace adcast::sim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct ClusterProcess {
    double weekly_amp;
    double weekly_phase;
    double cycle_period;
    double cycle_amp;
    double cycle_phase;
    std::vector<double> level;  // indexed by t + max_follow_lag
};

std::string category_name(int c) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "cat_%02d", c);
    return buf;
}

std::string advertiser_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "adv_%03d", i);
    return buf;
}

bool affected(const std::optional<ShockConfig>& shock, const std::string& category) {
    if (!shock) return false;
    for (const auto& c : shock->affected_categories) {
        if (c == category) return true;
    }
    return false;
}

} // namespace

void MarketConfig::validate() const {
    std::vector<std::string> problems;
    if (n_advertisers < 1) problems.push_back("n_advertisers must be >= 1");
    if (n_clusters < 1 || n_clusters > n_advertisers) problems.push_back("n_clusters must lie in [1, n_advertisers]");
    if (n_days < 120) problems.push_back("n_days must be >= 120");
    if (weekly_amp_range.first < 0.0 || weekly_amp_range.second < weekly_amp_range.first) {
        problems.push_back("weekly_amp_range must be a nonnegative interval");
    }
    for (const auto& sd : special_days) {
        if (sd.doy < 1 || sd.doy > 366) problems.push_back("special_days doy must lie in [1, 366]");
        if (!(sd.multiplier > 0.0)) problems.push_back("special_days multiplier must be > 0");
    }
    if (!(noise_scale >= 0.0)) problems.push_back("noise_scale must be >= 0");
    if (!(latent_phi > -1.0 && latent_phi < 1.0)) problems.push_back("latent_phi must lie in (-1, 1)");
    if (latent_sigma < 0.0 || cpc_noise < 0.0 || click_noise < 0.0 || ctr_noise < 0.0) {
        problems.push_back("noise scales must be >= 0");
    }
    if (max_follow_lag < 0) problems.push_back("max_follow_lag must be >= 0");
    if (budget_change_prob < 0.0 || budget_change_prob > 1.0) problems.push_back("budget_change_prob must lie in [0, 1]");
    if (budget_change_sigma < 0.0) problems.push_back("budget_change_sigma must be >= 0");
    if (category_mix < 0.0 || category_mix > 1.0) problems.push_back("category_mix must lie in [0, 1]");
    if (shock) {
        if (!(shock->budget_multiplier > 0.0)) problems.push_back("shock.budget_multiplier must be > 0");
        if (!(shock->cpc_multiplier > 0.0)) problems.push_back("shock.cpc_multiplier must be > 0");
        if (!(shock->volatility_multiplier > 0.0)) problems.push_back("shock.volatility_multiplier must be > 0");
        if (!(shock->budget_recovery_days > 0.0) || !(shock->cpc_recovery_days > 0.0)) {
            problems.push_back("shock recovery days must be > 0");
        }
        const long off = days_between(start_date, shock->date);
        if (off < 0 || off >= n_days) problems.push_back("shock.date must lie inside the simulated range");
    }
    if (!problems.empty()) {
        std::string msg = "invalid market config:";
        for (const auto& p : problems) msg += " " + p + ";";
        throw ValidationError(msg);
    }
}

SimulationResult simulate(const MarketConfig& config) {
    config.validate();
    const int n = config.n_days;
    const int k = config.n_clusters;
    const int lag_max = config.max_follow_lag;
    const double ns = config.noise_scale;

    Rng market = Rng::substream(config.seed, 0);
    std::vector<ClusterProcess> clusters(static_cast<std::size_t>(k));
    for (auto& c : clusters) {
        c.weekly_amp = market.uniform(config.weekly_amp_range.first, config.weekly_amp_range.second);
        c.weekly_phase = market.uniform(0.0, 7.0);
        c.cycle_period = market.uniform(45.0, 150.0);
        c.cycle_amp = ns * market.uniform(0.08, 0.2);
        c.cycle_phase = market.uniform(0.0, kTwoPi);
        c.level.resize(static_cast<std::size_t>(n + lag_max));
        const double stationary_sd = config.latent_sigma / std::sqrt(1.0 - config.latent_phi * config.latent_phi);
        double l = ns * stationary_sd * market.normal();
        for (auto& v : c.level) {
            v = l;
            l = config.latent_phi * l + ns * config.latent_sigma * market.normal();
        }
    }

    const CalendarFrame cal = CalendarFrame::from_range(config.start_date, static_cast<std::size_t>(n));
    std::vector<double> special(static_cast<std::size_t>(n), 1.0);
    for (int t = 0; t < n; ++t) {
        for (const auto& sd : config.special_days) {
            if (cal.doy[static_cast<std::size_t>(t)] == sd.doy) special[static_cast<std::size_t>(t)] *= sd.multiplier;
        }
    }

    // month index of every day, and first day of each month
    std::vector<int> month_idx(static_cast<std::size_t>(n));
    std::vector<Date> month_start;
    for (int t = 0; t < n; ++t) {
        const Date d = add_days(config.start_date, t);
        if (month_start.empty() || first_of_month(d) != month_start.back()) month_start.push_back(first_of_month(d));
        month_idx[static_cast<std::size_t>(t)] = static_cast<int>(month_start.size()) - 1;
    }

    std::vector<AdvertiserSeries> series;
    GroundTruth truth;
    if (config.shock) truth.shock_date = config.shock->date;
    const int sign = config.budget_elasticity > 0.0 ? 1 : (config.budget_elasticity < 0.0 ? -1 : 0);

    for (int i = 0; i < config.n_advertisers; ++i) {
        Rng rng = Rng::substream(config.seed, 1000 + static_cast<std::uint64_t>(i));
        const int c = i % k;
        const auto& cl = clusters[static_cast<std::size_t>(c)];

        std::string category = category_name(c);
        if (k > 1 && rng.bernoulli(config.category_mix)) {
            int other = static_cast<int>(rng.index(static_cast<std::size_t>(k - 1)));
            if (other >= c) ++other;
            category = category_name(other);
        }
        const double base_cpc = std::exp(rng.normal(0.0, 0.4));
        const int follow_lag = static_cast<int>(rng.index(static_cast<std::size_t>(lag_max + 1)));
        const double base_budget = std::exp(rng.normal(std::log(3000.0), 0.7));
        const double ctr = rng.uniform(0.02, 0.1);
        const double click_amp = rng.uniform(config.weekly_amp_range.first, config.weekly_amp_range.second);
        const double click_phase = rng.uniform(0.0, 7.0);
        const double click_scale = base_budget / (30.4 * base_cpc);

        std::vector<double> rel_budget(month_start.size());
        double r = rng.normal(0.0, config.budget_change_sigma);
        for (std::size_t m = 0; m < month_start.size(); ++m) {
            if (m > 0 && rng.bernoulli(config.budget_change_prob)) r = rng.normal(0.0, config.budget_change_sigma);
            double mult = 1.0;
            if (config.shock && affected(config.shock, category) && month_start[m] >= first_of_month(config.shock->date)) {
                const double elapsed = std::max(0.0, static_cast<double>(days_between(config.shock->date, month_start[m])));
                mult = 1.0 - (1.0 - config.shock->budget_multiplier) * std::exp(-elapsed / config.shock->budget_recovery_days);
            }
            rel_budget[m] = std::exp(r) * mult;
        }

        const bool shocked = affected(config.shock, category);
        AdvertiserSeries s;
        s.advertiser_id = advertiser_name(i);
        s.category = category;
        s.start = config.start_date;
        s.adcost.resize(static_cast<std::size_t>(n));
        s.adclicks.resize(static_cast<std::size_t>(n));
        s.impressions.resize(static_cast<std::size_t>(n));
        for (int t = 0; t < n; ++t) {
            const auto ut = static_cast<std::size_t>(t);
            const double rel = rel_budget[static_cast<std::size_t>(month_idx[ut])];
            const int lagged = t + lag_max - follow_lag;
            const double slow = cl.level[static_cast<std::size_t>(lagged)] +
                                cl.cycle_amp * std::sin(kTwoPi * (t - follow_lag) / cl.cycle_period + cl.cycle_phase);
            const double weekly = cl.weekly_amp * std::sin(kTwoPi * (t + cl.weekly_phase) / 7.0);

            double shock_cpc = 1.0;
            double vol = 1.0;
            if (shocked) {
                const long since = days_between(config.shock->date, add_days(config.start_date, t));
                if (since >= 0) {
                    const double e = static_cast<double>(since);
                    shock_cpc = 1.0 - (1.0 - config.shock->cpc_multiplier) * std::exp(-e / config.shock->cpc_recovery_days);
                    vol = 1.0 + (config.shock->volatility_multiplier - 1.0) *
                                    std::exp(-e / (0.25 * config.shock->cpc_recovery_days));
                }
            }
            const double cpc = base_cpc * std::exp(slow + weekly) * special[ut] * std::pow(rel, config.budget_elasticity) *
                               std::exp(ns * config.cpc_noise * vol * rng.normal()) * shock_cpc;
            const double click_weekly = click_amp * std::sin(kTwoPi * (t + click_phase) / 7.0);
            double clicks = click_scale * std::pow(rel, config.click_elasticity) * std::exp(click_weekly) *
                            std::exp(ns * config.click_noise * rng.normal());
            clicks = std::max(1.0, std::round(clicks));
            const double day_ctr = ctr * std::exp(ns * config.ctr_noise * rng.normal());
            s.adclicks[ut] = clicks;
            s.adcost[ut] = cpc * clicks;
            s.impressions[ut] = std::max(clicks, std::round(clicks / day_ctr));
        }
        truth.cluster_of[s.advertiser_id] = c;
        truth.elasticity_sign[s.advertiser_id] = sign;
        series.push_back(extract_budget(derive_cpc(std::move(s))));
    }
    return {PanelDataset(std::move(series)), std::move(truth)};
}

CalibrationReport validate_calibration(const PanelDataset& panel) {
    if (panel.size() < 2) throw ValidationError("calibration needs at least two advertisers");
    CalibrationReport report;
    double sum_clicks = 0.0, sum_impr = 0.0;
    std::size_t n_clicks = 0, n_impr = 0;
    for (const auto& s : panel.advertisers()) {
        if (s.adbudget.empty() || s.cpc.empty()) throw ValidationError("calibration needs a derived panel");
        const auto cc = stats::pearson(s.adclicks, s.adbudget);
        const auto ci = stats::pearson(s.impressions, s.adbudget);
        if (cc) {
            sum_clicks += *cc;
            ++n_clicks;
        } else {
            ++report.undefined_count;
        }
        if (ci) {
            sum_impr += *ci;
            ++n_impr;
        }
        if (s.size() >= 21) report.weekly_strength.push_back(clustering::extract_features(s.cpc).season);
    }
    if (n_clicks > 0) report.corr_clicks_budget = sum_clicks / static_cast<double>(n_clicks);
    if (n_impr > 0) report.corr_impressions_budget = sum_impr / static_cast<double>(n_impr);
    report.undefined = n_clicks == 0;
    return report;
}

ShockWindows shock_windows(const MarketConfig& config) {
    if (!config.shock) throw ValidationError("no shock configured");
    const auto& o = config.window_offsets;
    if (o.length_months < 1) throw ValidationError("window length must be >= 1 month");
    if (o.pre_start + o.length_months > 0 || o.post1_start < 1 || o.post1_start + o.length_months > o.post2_start) {
        throw ValidationError("shock window offsets must order pre < shock < post1 < post2 without overlap");
    }
    const Date m = first_of_month(config.shock->date);
    auto window = [&](int offset) { return DateRange{add_months(m, offset), add_months(m, offset + o.length_months)}; };
    ShockWindows w{window(o.pre_start), window(o.post1_start), window(o.post2_start)};
    const Date end = add_days(config.start_date, config.n_days);
    if (w.pre.first < config.start_date) throw ValidationError("pre-shock window starts before the simulated range");
    if (w.post2.last > end) throw ValidationError("simulated range does not cover the post-shock-2 window");
    return w;
}

void to_json(nlohmann::json& j, const MarketConfig& c) {
    j = nlohmann::json{{"n_advertisers", c.n_advertisers},
                       {"n_clusters", c.n_clusters},
                       {"n_days", c.n_days},
                       {"start_date", format_date(c.start_date)},
                       {"seed", c.seed},
                       {"budget_elasticity", c.budget_elasticity},
                       {"click_elasticity", c.click_elasticity},
                       {"weekly_amp_range", {c.weekly_amp_range.first, c.weekly_amp_range.second}},
                       {"noise_scale", c.noise_scale},
                       {"latent_phi", c.latent_phi},
                       {"latent_sigma", c.latent_sigma},
                       {"max_follow_lag", c.max_follow_lag},
                       {"budget_change_prob", c.budget_change_prob},
                       {"budget_change_sigma", c.budget_change_sigma},
                       {"category_mix", c.category_mix},
                       {"cpc_noise", c.cpc_noise},
                       {"click_noise", c.click_noise},
                       {"ctr_noise", c.ctr_noise}};
    auto days = nlohmann::json::array();
    for (const auto& sd : c.special_days) days.push_back({{"doy", sd.doy}, {"multiplier", sd.multiplier}});
    j["special_days"] = days;
    j["window_offsets"] = {{"pre_start", c.window_offsets.pre_start},
                           {"post1_start", c.window_offsets.post1_start},
                           {"post2_start", c.window_offsets.post2_start},
                           {"length_months", c.window_offsets.length_months}};
    if (c.shock) {
        j["shock"] = {{"date", format_date(c.shock->date)},
                      {"affected_categories", c.shock->affected_categories},
                      {"budget_multiplier", c.shock->budget_multiplier},
                      {"cpc_multiplier", c.shock->cpc_multiplier},
                      {"budget_recovery_days", c.shock->budget_recovery_days},
                      {"cpc_recovery_days", c.shock->cpc_recovery_days},
                      {"volatility_multiplier", c.shock->volatility_multiplier}};
    } else {
        j["shock"] = nullptr;
    }
}

void from_json(const nlohmann::json& j, MarketConfig& c) {
    try {
        c = MarketConfig{};
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) j.at(key).get_to(field);
        };
        get("n_advertisers", c.n_advertisers);
        get("n_clusters", c.n_clusters);
        get("n_days", c.n_days);
        if (j.contains("start_date")) c.start_date = parse_date(j.at("start_date").get<std::string>());
        get("seed", c.seed);
        get("budget_elasticity", c.budget_elasticity);
        get("click_elasticity", c.click_elasticity);
        if (j.contains("weekly_amp_range")) {
            const auto& r = j.at("weekly_amp_range");
            c.weekly_amp_range = {r.at(0).get<double>(), r.at(1).get<double>()};
        }
        get("noise_scale", c.noise_scale);
        get("latent_phi", c.latent_phi);
        get("latent_sigma", c.latent_sigma);
        get("max_follow_lag", c.max_follow_lag);
        get("budget_change_prob", c.budget_change_prob);
        get("budget_change_sigma", c.budget_change_sigma);
        get("category_mix", c.category_mix);
        get("cpc_noise", c.cpc_noise);
        get("click_noise", c.click_noise);
        get("ctr_noise", c.ctr_noise);
        if (j.contains("special_days")) {
            c.special_days.clear();
            for (const auto& sd : j.at("special_days")) {
                c.special_days.push_back({sd.at("doy").get<int>(), sd.at("multiplier").get<double>()});
            }
        }
        if (j.contains("window_offsets")) {
            const auto& o = j.at("window_offsets");
            if (o.contains("pre_start")) o.at("pre_start").get_to(c.window_offsets.pre_start);
            if (o.contains("post1_start")) o.at("post1_start").get_to(c.window_offsets.post1_start);
            if (o.contains("post2_start")) o.at("post2_start").get_to(c.window_offsets.post2_start);
            if (o.contains("length_months")) o.at("length_months").get_to(c.window_offsets.length_months);
        }
        if (j.contains("shock") && !j.at("shock").is_null()) {
            const auto& s = j.at("shock");
            ShockConfig shock;
            shock.date = parse_date(s.at("date").get<std::string>());
            if (s.contains("affected_categories")) s.at("affected_categories").get_to(shock.affected_categories);
            if (s.contains("budget_multiplier")) s.at("budget_multiplier").get_to(shock.budget_multiplier);
            if (s.contains("cpc_multiplier")) s.at("cpc_multiplier").get_to(shock.cpc_multiplier);
            if (s.contains("budget_recovery_days")) s.at("budget_recovery_days").get_to(shock.budget_recovery_days);
            if (s.contains("cpc_recovery_days")) s.at("cpc_recovery_days").get_to(shock.cpc_recovery_days);
            if (s.contains("volatility_multiplier")) s.at("volatility_multiplier").get_to(shock.volatility_multiplier);
            c.shock = shock;
        } else {
            c.shock.reset();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("invalid market config JSON: ") + e.what());
    }
}

void to_json(nlohmann::json& j, const GroundTruth& g) {
    j = nlohmann::json{{"cluster_of", g.cluster_of}, {"elasticity_sign", g.elasticity_sign}};
    j["shock_date"] = g.shock_date ? nlohmann::json(format_date(*g.shock_date)) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, GroundTruth& g) {
    g = GroundTruth{};
    j.at("cluster_of").get_to(g.cluster_of);
    if (j.contains("elasticity_sign")) j.at("elasticity_sign").get_to(g.elasticity_sign);
    if (j.contains("shock_date") && !j.at("shock_date").is_null()) {
        g.shock_date = parse_date(j.at("shock_date").get<std::string>());
    }
}

} // namespace adcast::sim

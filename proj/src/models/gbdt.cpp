#include "adcast/models/gbdt.hpp"

#include "adcast/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace adcast::models {

double Tree::predict(std::span<const double> row) const {
    int at = 0;
    while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
        const TreeNode& n = nodes[static_cast<std::size_t>(at)];
        at = row[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(at)].value;
}

double Booster::predict(std::span<const double> row) const {
    double s = base;
    for (const Tree& t : trees) s += t.predict(row);
    return s;
}

double split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma) {
    const double g = gl + gr, h = hl + hr;
    return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma;
}

namespace {

struct Candidate {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

// Grows one tree level by level. Every level scans each feature's presorted
// order once, accumulating left sums for all open nodes at the same time.
Tree grow_tree(const Matrix& x, const std::vector<double>& grad, const std::vector<std::vector<std::size_t>>& sorted,
               const GbdtConfig& cfg) {
    const std::size_t n = x.rows(), nf = x.cols();
    Tree tree;
    tree.nodes.push_back({});
    std::vector<int> node_of(n, 0);
    std::vector<int> open{0};
    std::vector<double> g_tot(1, 0.0), h_tot(1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        g_tot[0] += grad[i];
        h_tot[0] += 1.0;
    }
    for (int depth = 0; depth < cfg.depth && !open.empty(); ++depth) {
        const std::size_t n_nodes = tree.nodes.size();
        std::vector<int> slot(n_nodes, -1);
        for (std::size_t k = 0; k < open.size(); ++k) slot[static_cast<std::size_t>(open[k])] = static_cast<int>(k);
        std::vector<Candidate> best(open.size());
        std::vector<double> gl(open.size()), hl(open.size()), last(open.size());
        std::vector<char> seen(open.size());
        for (std::size_t f = 0; f < nf; ++f) {
            std::fill(gl.begin(), gl.end(), 0.0);
            std::fill(hl.begin(), hl.end(), 0.0);
            std::fill(seen.begin(), seen.end(), 0);
            for (std::size_t i : sorted[f]) {
                const int s = slot[static_cast<std::size_t>(node_of[i])];
                if (s < 0) continue;
                const auto k = static_cast<std::size_t>(s);
                const double v = x(i, f);
                const std::size_t node = static_cast<std::size_t>(open[k]);
                if (seen[k] && v > last[k]) {
                    const double gr = g_tot[node] - gl[k], hr = h_tot[node] - hl[k];
                    if (hl[k] >= cfg.min_child && hr >= cfg.min_child) {
                        const double gain = split_gain(gl[k], hl[k], gr, hr, cfg.lambda, cfg.gamma);
                        if (gain > best[k].gain) best[k] = {gain, static_cast<int>(f), 0.5 * (last[k] + v)};
                    }
                }
                gl[k] += grad[i];
                hl[k] += 1.0;
                last[k] = v;
                seen[k] = 1;
            }
        }
        std::vector<int> next;
        for (std::size_t k = 0; k < open.size(); ++k) {
            if (best[k].feature < 0) continue;
            const auto node = static_cast<std::size_t>(open[k]);
            const int left = static_cast<int>(tree.nodes.size());
            tree.nodes.push_back({});
            tree.nodes.push_back({});
            tree.nodes[node].feature = best[k].feature;
            tree.nodes[node].threshold = best[k].threshold;
            tree.nodes[node].gain = best[k].gain;
            tree.nodes[node].left = left;
            tree.nodes[node].right = left + 1;
            g_tot.resize(tree.nodes.size(), 0.0);
            h_tot.resize(tree.nodes.size(), 0.0);
            next.push_back(left);
            next.push_back(left + 1);
        }
        if (next.empty()) break;
        for (std::size_t i = 0; i < n; ++i) {
            const TreeNode& parent = tree.nodes[static_cast<std::size_t>(node_of[i])];
            if (parent.feature < 0) continue;
            node_of[i] = x(i, static_cast<std::size_t>(parent.feature)) < parent.threshold ? parent.left : parent.right;
            g_tot[static_cast<std::size_t>(node_of[i])] += grad[i];
            h_tot[static_cast<std::size_t>(node_of[i])] += 1.0;
        }
        open = std::move(next);
    }
    for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
        if (tree.nodes[k].feature < 0) tree.nodes[k].value = -cfg.lr * g_tot[k] / (h_tot[k] + cfg.lambda);
    }
    return tree;
}

} // namespace

Booster fit_booster(const Matrix& x, const std::vector<double>& y, const GbdtConfig& config) {
    if (x.rows() == 0 || y.empty()) throw ValidationError("gbdt: empty training data");
    if (x.rows() != y.size()) throw ValidationError("gbdt: feature rows do not match labels");
    for (double v : x.data()) {
        if (!std::isfinite(v)) throw ValidationError("gbdt: missing feature values");
    }
    const std::size_t n = x.rows();
    Booster b;
    b.base = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    std::vector<std::vector<std::size_t>> sorted(x.cols(), std::vector<std::size_t>(n));
    for (std::size_t f = 0; f < x.cols(); ++f) {
        std::iota(sorted[f].begin(), sorted[f].end(), 0);
        std::stable_sort(sorted[f].begin(), sorted[f].end(), [&](std::size_t a, std::size_t c) { return x(a, f) < x(c, f); });
    }
    std::vector<double> pred(n, b.base), grad(n);
    for (int round = 0; round < config.rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) grad[i] = pred[i] - y[i];
        Tree t = grow_tree(x, grad, sorted, config);
        for (std::size_t i = 0; i < n; ++i) pred[i] += t.predict(x.row(i));
        b.trees.push_back(std::move(t));
    }
    return b;
}

std::vector<double> booster_importance(const std::vector<Booster>& boosters, std::size_t n_features) {
    std::vector<double> imp(n_features, 0.0);
    for (const Booster& b : boosters) {
        for (const Tree& t : b.trees) {
            for (const TreeNode& node : t.nodes) {
                if (node.feature >= 0) imp.at(static_cast<std::size_t>(node.feature)) += node.gain;
            }
        }
    }
    const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
    if (total > 0.0) {
        for (double& v : imp) v /= total;
    }
    return imp;
}

namespace {

// Trees split an ordinal index as well as its one-hot columns, with far fewer features.
bool is_one_hot(const KnownVariable& v) { return !v.standardize && v.width > 2; }

} // namespace

std::vector<std::string> tabular_feature_names(const ModelInput& input, const std::vector<int>& lags) {
    std::vector<std::string> names;
    const std::string& target = input.past_names.at(input.target);
    for (int l : lags) names.push_back(target + "_lag" + std::to_string(l));
    for (std::size_t c = 0; c < input.past_names.size(); ++c) {
        if (c != input.target) names.push_back(input.past_names[c] + "_lag1");
    }
    for (const auto& v : input.known_vars) {
        if (is_one_hot(v)) {
            names.push_back(v.name + "_target");
            continue;
        }
        for (std::size_t k = 0; k < v.width; ++k) {
            names.push_back(v.width == 1 ? v.name + "_target" : v.name + "_target" + std::to_string(k));
        }
    }
    return names;
}

std::vector<std::size_t> tabular_feature_variables(const ModelInput& input, const std::vector<int>& lags) {
    std::vector<std::size_t> vars(lags.size(), input.target);
    for (std::size_t c = 0; c < input.past_names.size(); ++c) {
        if (c != input.target) vars.push_back(c);
    }
    for (std::size_t v = 0; v < input.known_vars.size(); ++v) {
        const std::size_t n = is_one_hot(input.known_vars[v]) ? 1 : input.known_vars[v].width;
        for (std::size_t k = 0; k < n; ++k) vars.push_back(input.past_names.size() + v);
    }
    return vars;
}

std::vector<double> tabular_row(const ModelInput& input, std::size_t anchor, std::size_t step,
                                const std::vector<int>& lags) {
    std::vector<double> row;
    for (int l : lags) {
        const auto back = static_cast<std::size_t>(l) - 1;
        if (back > anchor) throw ValidationError("tabularize: lag " + std::to_string(l) + " reaches before the history");
        row.push_back(input.past(anchor - back, input.target));
    }
    for (std::size_t c = 0; c < input.past.cols(); ++c) {
        if (c != input.target) row.push_back(input.past(anchor, c));
    }
    const std::size_t when = anchor + step;
    if (when >= input.known.rows()) throw ValidationError("tabularize: target date beyond the known-future rows");
    for (const auto& v : input.known_vars) {
        if (is_one_hot(v)) {
            std::size_t hot = 0;
            for (std::size_t k = 1; k < v.width; ++k) {
                if (input.known(when, v.begin + k) > input.known(when, v.begin + hot)) hot = k;
            }
            row.push_back(static_cast<double>(hot));
            continue;
        }
        for (std::size_t k = 0; k < v.width; ++k) row.push_back(input.known(when, v.begin + k));
    }
    return row;
}

Tabular tabularize(const ModelInput& input, std::size_t step, const std::vector<int>& lags) {
    if (lags.empty() || step == 0) throw ValidationError("tabularize: need at least one lag and step >= 1");
    const auto max_lag = static_cast<std::size_t>(*std::max_element(lags.begin(), lags.end()));
    if (*std::min_element(lags.begin(), lags.end()) < 1) throw ValidationError("tabularize: lags must be >= 1");
    const std::size_t t_len = input.history();
    if (t_len < max_lag + step) {
        throw ValidationError("tabularize: " + std::to_string(t_len) + " history days, need at least " +
                              std::to_string(max_lag + step));
    }
    Tabular tab;
    tab.feature_names = tabular_feature_names(input, lags);
    const std::size_t first = max_lag - 1, last = t_len - 1 - step;
    tab.x = Matrix(last - first + 1, tab.feature_names.size());
    for (std::size_t t = first; t <= last; ++t) {
        const auto row = tabular_row(input, t, step, lags);
        std::copy(row.begin(), row.end(), tab.x.row(t - first).begin());
        tab.y.push_back(input.past(t + step, input.target));
        tab.anchors.push_back(t);
    }
    return tab;
}

nlohmann::json booster_to_json(const Booster& b) {
    auto trees = nlohmann::json::array();
    for (const Tree& t : b.trees) {
        auto nodes = nlohmann::json::array();
        for (const TreeNode& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.gain});
        trees.push_back(std::move(nodes));
    }
    return {{"base", b.base}, {"trees", trees}};
}

Booster booster_from_json(const nlohmann::json& j) {
    Booster b;
    b.base = j.at("base").get<double>();
    for (const auto& nodes : j.at("trees")) {
        Tree t;
        for (const auto& n : nodes) {
            t.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                               n.at(4).get<double>(), n.at(5).get<double>()});
        }
        b.trees.push_back(std::move(t));
    }
    return b;
}

namespace {

double empirical_quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

} // namespace

TrainedModel fit_gbdt(const ModelInput& input, const ModelConfig& config) {
    TrainedModel m;
    m.kind = ModelKind::gbdt;
    m.config = config;
    m.past_names = input.past_names;
    m.known_vars = input.known_vars;
    m.static_names = input.static_names;
    auto steps = nlohmann::json::array();
    double loss = 0.0;
    for (std::size_t s = 1; s <= config.horizon; ++s) {
        const Tabular tab = tabularize(input, s, config.gbdt.lags);
        const Booster b = fit_booster(tab.x, tab.y, config.gbdt);
        // In-sample residual quantiles give the band around the point forecast.
        std::vector<double> res(tab.y.size());
        for (std::size_t i = 0; i < res.size(); ++i) res[i] = tab.y[i] - b.predict(tab.x.row(i));
        std::vector<double> offsets;
        for (double q : config.quantiles) offsets.push_back(empirical_quantile(res, q));
        for (double r : res) loss += r * r / static_cast<double>(res.size() * config.horizon);
        steps.push_back({{"booster", booster_to_json(b)}, {"offsets", offsets}});
    }
    m.train_loss = {loss};
    m.state = {{"steps", steps}, {"feature_names", tabular_feature_names(input, config.gbdt.lags)}};
    return m;
}

ForecastResult predict_gbdt(const TrainedModel& model, const ModelInput& input) {
    const auto& cfg = model.config;
    const auto& steps = model.state.at("steps");
    if (steps.size() != cfg.horizon) throw ValidationError("gbdt model has the wrong number of step boosters");
    const std::size_t n_features = model.state.at("feature_names").size();
    Matrix band(cfg.horizon, cfg.quantiles.size());
    std::vector<Booster> boosters;
    for (std::size_t s = 1; s <= cfg.horizon; ++s) {
        const auto& step = steps.at(s - 1);
        boosters.push_back(booster_from_json(step.at("booster")));
        const auto row = tabular_row(input, input.history() - 1, s, cfg.gbdt.lags);
        if (row.size() != n_features) throw ValidationError("gbdt: input channels differ from the training input");
        const double point = boosters.back().predict(row);
        const auto offsets = step.at("offsets").get<std::vector<double>>();
        for (std::size_t q = 0; q < offsets.size(); ++q) band(s - 1, q) = point + offsets[q];
        // Keep the median on the booster output itself.
        band(s - 1, cfg.median_index()) = point;
    }
    ForecastResult r = assemble_forecast(cfg, input, std::move(band));
    // Aggregate split gains onto the input variables.
    const auto imp = booster_importance(boosters, n_features);
    const auto vars = tabular_feature_variables(input, cfg.gbdt.lags);
    std::vector<double> enc(input.past_names.size() + input.known_vars.size(), 0.0);
    for (std::size_t f = 0; f < imp.size(); ++f) enc[vars[f]] += imp[f];
    const double total = std::accumulate(enc.begin(), enc.end(), 0.0);
    if (total > 0.0) {
        r.encoder_importance = enc;
        std::vector<double> dec(enc.begin() + static_cast<std::ptrdiff_t>(input.past_names.size()), enc.end());
        const double dt = std::accumulate(dec.begin(), dec.end(), 0.0);
        if (dt > 0.0) {
            for (double& v : dec) v /= dt;
            r.decoder_importance = dec;
        }
    }
    return r;
}

std::vector<double> gbdt_importance(const TrainedModel& model) {
    if (model.kind != ModelKind::gbdt) throw ValidationError("gbdt_importance needs a gbdt model");
    std::vector<Booster> boosters;
    for (const auto& step : model.state.at("steps")) boosters.push_back(booster_from_json(step.at("booster")));
    return booster_importance(boosters, model.state.at("feature_names").size());
}

} // namespace adcast::models

#include "adcast/autodiff/params.hpp"

#include "adcast/errors.hpp"

#include <cmath>

namespace adcast::ad {

namespace {

Param& emplace(std::map<std::string, Param>& params, const std::string& name, std::size_t rows, std::size_t cols) {
    auto it = params.find(name);
    if (it != params.end()) {
        if (it->second.rows != rows || it->second.cols != cols) {
            throw ValidationError("parameter '" + name + "' exists with a different shape");
        }
        return it->second;
    }
    Param p;
    p.rows = rows;
    p.cols = cols;
    p.value.assign(rows * cols, 0.0);
    p.m.assign(rows * cols, 0.0);
    p.v.assign(rows * cols, 0.0);
    return params.emplace(name, std::move(p)).first->second;
}

} // namespace

Param& ParamStore::get_or_create(const std::string& name, std::size_t rows, std::size_t cols, Rng& rng) {
    const bool fresh = !params_.contains(name);
    Param& p = emplace(params_, name, rows, cols);
    if (fresh) {
        const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
        for (double& v : p.value) v = rng.uniform(-limit, limit);
    }
    return p;
}

Param& ParamStore::get_or_create(const std::string& name, std::size_t rows, std::size_t cols, double fill) {
    const bool fresh = !params_.contains(name);
    Param& p = emplace(params_, name, rows, cols);
    if (fresh) std::fill(p.value.begin(), p.value.end(), fill);
    return p;
}

Param& ParamStore::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw NotFoundError("no parameter named '" + name + "'");
    return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw NotFoundError("no parameter named '" + name + "'");
    return it->second;
}

std::size_t ParamStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : params_) n += p.value.size();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& [name, p] : params_) p.grad.assign(p.value.size(), 0.0);
}

void ParamStore::adam_step(double lr, double beta1, double beta2, double eps) {
    for (const auto& [name, p] : params_) {
        if (p.grad.size() != p.value.size()) throw ValidationError("parameter '" + name + "' has no gradient");
    }
    ++step_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
    for (auto& [name, p] : params_) {
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            p.m[i] = beta1 * p.m[i] + (1.0 - beta1) * g;
            p.v[i] = beta2 * p.v[i] + (1.0 - beta2) * g * g;
            const double m_hat = p.m[i] / c1;
            const double v_hat = p.v[i] / c2;
            p.value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

double ParamStore::clip_grad_norm(double max_norm) {
    double sq = 0.0;
    for (const auto& [name, p] : params_) {
        for (double g : p.grad) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double f = max_norm / norm;
        for (auto& [name, p] : params_) {
            for (double& g : p.grad) g *= f;
        }
    }
    return norm;
}

std::map<std::string, std::vector<double>> ParamStore::snapshot() const {
    std::map<std::string, std::vector<double>> out;
    for (const auto& [name, p] : params_) out.emplace(name, p.value);
    return out;
}

void ParamStore::restore(const std::map<std::string, std::vector<double>>& values) {
    for (const auto& [name, v] : values) {
        Param& p = at(name);
        if (p.value.size() != v.size()) throw ValidationError("snapshot of '" + name + "' has the wrong size");
        p.value = v;
    }
}

nlohmann::json checkpoint_json(const ParamStore& store) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, p] : store.params()) {
        j[name] = {{"shape", {p.rows, p.cols}}, {"values", p.value}};
    }
    return j;
}

ParamStore load_checkpoint(const nlohmann::json& j) {
    ParamStore store;
    try {
        for (const auto& [name, entry] : j.items()) {
            const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
            if (shape.size() != 2) throw ValidationError("checkpoint entry '" + name + "' needs a 2-d shape");
            Param& p = store.get_or_create(name, shape[0], shape[1], 0.0);
            p.value = entry.at("values").get<std::vector<double>>();
            if (p.value.size() != shape[0] * shape[1]) {
                throw ValidationError("checkpoint entry '" + name + "' has the wrong number of values");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed checkpoint: ") + e.what());
    }
    return store;
}

} // namespace adcast::ad

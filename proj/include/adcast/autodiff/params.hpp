#pragma once

#include "adcast/rng.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace adcast::ad {

struct Param {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<double> m;  // Adam first moment
    std::vector<double> v;  // Adam second moment
};

/// Named parameters with gradients and Adam state. Iteration order is by name,
/// which keeps updates and checkpoints deterministic.
class ParamStore {
public:
    /// Creates a parameter with Glorot-uniform values, or returns the existing one
    /// after checking its shape.
    Param& get_or_create(const std::string& name, std::size_t rows, std::size_t cols, Rng& rng);
    /// Creates a parameter filled with `fill`.
    Param& get_or_create(const std::string& name, std::size_t rows, std::size_t cols, double fill);

    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.contains(name); }

    std::map<std::string, Param>& params() { return params_; }
    const std::map<std::string, Param>& params() const { return params_; }

    std::size_t step() const { return step_; }
    std::size_t parameter_count() const;

    void zero_grad();

    /// Bias-corrected Adam update. Throws ValidationError if a parameter has no gradient buffer.
    void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    /// Rescales all gradients so their joint L2 norm is at most max_norm; returns the norm before clipping.
    double clip_grad_norm(double max_norm);

    /// Snapshot / restore of parameter values only (used for early stopping).
    std::map<std::string, std::vector<double>> snapshot() const;
    void restore(const std::map<std::string, std::vector<double>>& values);

private:
    std::map<std::string, Param> params_;
    std::size_t step_ = 0;
};

/// Checkpoint: {name: {"shape": [rows, cols], "values": [...]}}.
nlohmann::json checkpoint_json(const ParamStore& store);
ParamStore load_checkpoint(const nlohmann::json& j);

} // namespace adcast::ad

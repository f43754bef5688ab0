#pragma once

#include "adcast/models/model.hpp"
#include "adcast/rng.hpp"

#include <optional>
#include <string>
#include <vector>

namespace adcast::testing {

struct Channel {
    std::string name;
    std::vector<double> values;
};

/// Hand-built model input. The first channel is the target. Known variables
/// are an optional budget plan (T + H values) followed by a day-of-week one-hot.
inline models::ModelInput make_input(const std::vector<Channel>& past, std::size_t horizon,
                                     const std::optional<std::vector<double>>& budget = std::nullopt,
                                     Date start = parse_date("2020-01-06")) {
    models::ModelInput in;
    in.advertiser_id = "fixture";
    in.start = start;
    in.horizon = horizon;
    const std::size_t t = past.front().values.size();
    in.past = Matrix(t, past.size());
    for (std::size_t c = 0; c < past.size(); ++c) {
        in.past_names.push_back(past[c].name);
        for (std::size_t r = 0; r < t; ++r) in.past(r, c) = past[c].values[r];
    }
    std::size_t width = 0;
    if (budget) in.known_vars.push_back({"adbudget", width++, 1, true});
    in.known_vars.push_back({"dow", width, 7, false});
    width += 7;
    in.known = Matrix(t + horizon, width);
    for (std::size_t r = 0; r < t + horizon; ++r) {
        std::size_t col = 0;
        if (budget) in.known(r, col++) = (*budget)[r];
        in.known(r, col + static_cast<std::size_t>(day_of_week(add_days(start, static_cast<long>(r))))) = 1.0;
    }
    in.static_names = {"category=a"};
    in.static_values = {1.0};
    in.validate();
    return in;
}

/// Stationary AR(1) around `mean`.
inline std::vector<double> ar1(std::size_t n, double phi, double sigma, double mean, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> y(n);
    double x = 0.0;
    for (std::size_t i = 0; i < 200 + n; ++i) {
        x = phi * x + sigma * rng.normal();
        if (i >= 200) y[i - 200] = mean + x;
    }
    return y;
}

inline std::vector<double> weekly(std::size_t n, std::vector<double> cycle = {1.0, 1.2, 0.9, 1.1, 1.4, 0.7, 0.8}) {
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = cycle[i % cycle.size()];
    return y;
}

inline models::ModelConfig small_config(models::ModelKind kind, std::size_t horizon, std::size_t encoder) {
    models::ModelConfig c;
    c.kind = kind;
    c.horizon = horizon;
    c.encoder_length = encoder;
    c.hidden = 8;
    c.epochs = 20;
    c.seed = 3;
    return c;
}

} // namespace adcast::testing

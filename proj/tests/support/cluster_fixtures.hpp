#pragma once

#include "adcast/matrix.hpp"
#include "adcast/rng.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace adcast::testing {

struct Blobs {
    Matrix points;
    std::vector<int> labels;
};

inline Blobs blobs(std::uint64_t seed, std::size_t per_blob = 15) {
    const double centres[3][2] = {{0, 0}, {10, 0}, {0, 10}};
    Rng rng(seed);
    Blobs b{Matrix(3 * per_blob, 2), {}};
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < per_blob; ++i) {
            const std::size_t r = c * per_blob + i;
            b.points(r, 0) = centres[c][0] + rng.normal(0.0, 0.5);
            b.points(r, 1) = centres[c][1] + rng.normal(0.0, 0.5);
            b.labels.push_back(static_cast<int>(c));
        }
    }
    return b;
}

struct Shapes {
    std::vector<std::vector<double>> series;
    std::vector<int> labels;
};

// Sine, linear trend and level shift, each with jittered phase/position plus noise.
inline Shapes shapes(std::uint64_t seed, std::size_t per_shape = 8, std::size_t n = 80) {
    Rng rng(seed);
    Shapes s;
    for (int shape = 0; shape < 3; ++shape) {
        for (std::size_t i = 0; i < per_shape; ++i) {
            std::vector<double> y(n);
            const double shift = rng.uniform(-3.0, 3.0);
            for (std::size_t t = 0; t < n; ++t) {
                const double tt = static_cast<double>(t) + shift;
                double v = 0.0;
                if (shape == 0) v = 2.0 * std::sin(2.0 * std::numbers::pi * tt / 20.0);
                if (shape == 1) v = -2.0 + 4.0 * tt / static_cast<double>(n);
                if (shape == 2) v = tt < static_cast<double>(n) / 2.0 ? -1.5 : 1.5;
                y[t] = v + rng.normal(0.0, 0.3);
            }
            s.series.push_back(std::move(y));
            s.labels.push_back(shape);
        }
    }
    return s;
}


} // namespace adcast::testing

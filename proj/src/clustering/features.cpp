#include "adcast/clustering/features.hpp"

#include "adcast/errors.hpp"
#include "adcast/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace adcast::clustering {

namespace {

// Variance of the sum a + b over the valid decomposition range.
double variance_of_sum(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> s(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) s[i] = a[i] + b[i];
    return stats::variance(s);
}

double strength(double var_remainder, double var_component_plus_remainder) {
    if (var_component_plus_remainder <= 1e-300) return 0.0;
    return std::max(0.0, 1.0 - var_remainder / var_component_plus_remainder);
}

double spectral_entropy(std::span<const double> y) {
    const std::size_t n = y.size();
    const std::size_t n_freq = n / 2;
    if (n_freq < 2) return 0.0;
    const double m = stats::mean(y);
    std::vector<double> cos_table(n), sin_table(n);
    for (std::size_t t = 0; t < n; ++t) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(n);
        cos_table[t] = std::cos(a);
        sin_table[t] = std::sin(a);
    }
    std::vector<double> power(n_freq);
    double total = 0.0;
    for (std::size_t k = 1; k <= n_freq; ++k) {
        double re = 0.0, im = 0.0;
        std::size_t idx = 0;
        for (std::size_t t = 0; t < n; ++t) {
            const double v = y[t] - m;
            re += v * cos_table[idx];
            im -= v * sin_table[idx];
            idx += k;
            if (idx >= n) idx -= n;
        }
        power[k - 1] = re * re + im * im;
        total += power[k - 1];
    }
    if (total <= 1e-300) return 0.0;
    double h = 0.0;
    for (double p : power) {
        const double q = p / total;
        if (q > 0.0) h -= q * std::log(q);
    }
    return std::clamp(h / std::log(static_cast<double>(n_freq)), 0.0, 1.0);
}

} // namespace

std::array<double, FeatureVector14::kSize> FeatureVector14::values() const {
    return {mean, variance, acf_1, trend, linearity, curvature, season,
            peak, trough, entropy, lumpiness, spikiness, f_spots, c_points};
}

Decomposition decompose(std::span<const double> y, std::size_t period) {
    const std::size_t n = y.size();
    const std::size_t span = 3 * std::max<std::size_t>(period, 1);
    Decomposition d;
    // Odd spans use a plain centered average; even spans the 2 x span centered average.
    const std::size_t half = span / 2;
    if (n <= 2 * half) return d;
    d.begin = half;
    d.end = n - half;
    const std::size_t len = d.end - d.begin;
    d.trend.resize(len);
    for (std::size_t t = d.begin; t < d.end; ++t) {
        double s = 0.0;
        if (span % 2 == 1) {
            for (std::size_t k = t - half; k <= t + half; ++k) s += y[k];
            s /= static_cast<double>(span);
        } else {
            for (std::size_t k = t - half + 1; k < t + half; ++k) s += y[k];
            s += 0.5 * (y[t - half] + y[t + half]);
            s /= static_cast<double>(span);
        }
        d.trend[t - d.begin] = s;
    }
    std::vector<double> phase_sum(period, 0.0);
    std::vector<std::size_t> phase_n(period, 0);
    for (std::size_t t = d.begin; t < d.end; ++t) {
        phase_sum[t % period] += y[t] - d.trend[t - d.begin];
        ++phase_n[t % period];
    }
    std::vector<double> phase_mean(period, 0.0);
    for (std::size_t p = 0; p < period; ++p) phase_mean[p] = phase_n[p] ? phase_sum[p] / static_cast<double>(phase_n[p]) : 0.0;
    const double centre = stats::mean(phase_mean);
    d.seasonal.resize(len);
    d.remainder.resize(len);
    for (std::size_t t = d.begin; t < d.end; ++t) {
        const double s = period > 1 ? phase_mean[t % period] - centre : 0.0;
        d.seasonal[t - d.begin] = s;
        d.remainder[t - d.begin] = y[t] - d.trend[t - d.begin] - s;
    }
    return d;
}

FeatureVector14 extract_features(std::span<const double> y, std::size_t period) {
    const std::size_t n = y.size();
    if (period == 0) throw ValidationError("period must be >= 1");
    if (n < 3 * period || n < 4) throw ValidationError("series too short for feature extraction");
    for (double v : y) {
        if (std::isnan(v)) throw ValidationError("feature extraction requires a series without missing values");
    }

    FeatureVector14 f;
    f.mean = stats::mean(y);
    f.variance = stats::variance(y);
    const auto [lo_it, hi_it] = std::minmax_element(y.begin(), y.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    f.degenerate = lo == hi;

    // flat spots: longest run within one of ten equal-width bins
    {
        std::size_t best = 0, run = 0;
        int prev_bin = -1;
        for (double v : y) {
            int bin = 0;
            if (hi > lo) bin = std::min(9, static_cast<int>(std::floor((v - lo) / (hi - lo) * 10.0)));
            run = bin == prev_bin ? run + 1 : 1;
            prev_bin = bin;
            best = std::max(best, run);
        }
        f.f_spots = static_cast<double>(best);
    }

    if (f.degenerate) {
        f.variance = 0.0;
        return f;
    }

    {
        double num = 0.0, den = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            den += (y[t] - f.mean) * (y[t] - f.mean);
            if (t + 1 < n) num += (y[t] - f.mean) * (y[t + 1] - f.mean);
        }
        f.acf_1 = num / den;
    }

    {
        const double med = stats::median(std::vector<double>(y.begin(), y.end()));
        std::size_t crossings = 0;
        for (std::size_t t = 0; t + 1 < n; ++t) {
            if ((y[t] <= med) != (y[t + 1] <= med)) ++crossings;
        }
        f.c_points = static_cast<double>(crossings);
    }

    f.entropy = spectral_entropy(y);

    {
        const auto z = stats::zscore(y);
        constexpr std::size_t kBlock = 28;
        std::vector<double> block_var;
        for (std::size_t b = 0; b + kBlock <= n; b += kBlock) {
            block_var.push_back(stats::variance(std::span<const double>(z).subspan(b, kBlock)));
        }
        f.lumpiness = block_var.size() >= 2 ? stats::variance(block_var) : 0.0;
    }

    const Decomposition d = decompose(y, period);
    if (d.trend.size() >= 3) {
        const double var_r = stats::variance(d.remainder);
        f.trend = strength(var_r, variance_of_sum(d.trend, d.remainder));
        f.season = period > 1 ? strength(var_r, variance_of_sum(d.seasonal, d.remainder)) : 0.0;
        f.peak = *std::max_element(d.seasonal.begin(), d.seasonal.end());
        f.trough = -*std::min_element(d.seasonal.begin(), d.seasonal.end());

        // orthonormal degree-1 and degree-2 polynomials over the trend's time index
        const std::size_t m = d.trend.size();
        std::vector<double> p1(m), p2(m);
        const double tbar = (static_cast<double>(m) - 1.0) / 2.0;
        for (std::size_t i = 0; i < m; ++i) p1[i] = static_cast<double>(i) - tbar;
        double norm1 = 0.0;
        for (double v : p1) norm1 += v * v;
        norm1 = std::sqrt(norm1);
        for (double& v : p1) v /= norm1;
        for (std::size_t i = 0; i < m; ++i) p2[i] = (static_cast<double>(i) - tbar) * (static_cast<double>(i) - tbar);
        const double m2 = stats::mean(p2);
        double proj = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            p2[i] -= m2;
            proj += p2[i] * p1[i];
        }
        double norm2 = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            p2[i] -= proj * p1[i];
            norm2 += p2[i] * p2[i];
        }
        norm2 = std::sqrt(norm2);
        for (double& v : p2) v /= norm2;
        for (std::size_t i = 0; i < m; ++i) {
            f.linearity += d.trend[i] * p1[i];
            f.curvature += d.trend[i] * p2[i];
        }

        // spikiness: spread of the leave-one-out (sample) variances of the remainder
        const auto& r = d.remainder;
        if (m >= 3) {
            double s1 = 0.0, s2 = 0.0;
            for (double v : r) {
                s1 += v;
                s2 += v * v;
            }
            std::vector<double> loo(m);
            const double k = static_cast<double>(m - 1);
            for (std::size_t i = 0; i < m; ++i) {
                const double mean_i = (s1 - r[i]) / k;
                loo[i] = std::max(0.0, (s2 - r[i] * r[i] - k * mean_i * mean_i) / (k - 1.0));
            }
            f.spikiness = stats::variance(loo);
        }
    }
    return f;
}

Matrix feature_matrix(const std::vector<FeatureVector14>& features) {
    Matrix m(features.size(), FeatureVector14::kSize);
    for (std::size_t i = 0; i < features.size(); ++i) {
        const auto v = features[i].values();
        for (std::size_t c = 0; c < FeatureVector14::kSize; ++c) m(i, c) = v[c];
    }
    return m;
}

Matrix znormalize(const Matrix& points) {
    if (points.rows() < 2) throw ValidationError("znormalize needs at least two vectors");
    Matrix out(points.rows(), points.cols(), 0.0);
    for (std::size_t c = 0; c < points.cols(); ++c) {
        const auto col = points.column(c);
        const double m = stats::mean(col);
        const double sd = stats::stdev(col);
        if (!(sd > 1e-12 * (1.0 + std::abs(m)))) continue;
        for (std::size_t r = 0; r < points.rows(); ++r) out(r, c) = (col[r] - m) / sd;
    }
    return out;
}

} // namespace adcast::clustering

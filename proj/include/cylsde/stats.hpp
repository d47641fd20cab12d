#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace cylsde {

/// Fixed-order pairwise-tree sum. Independent of worker scheduling and better
/// conditioned than a running fold.
inline double pairwise_sum(const double* x, std::size_t n) {
    if (n == 0) return 0.0;
    if (n <= 8) {
        double acc = x[0];
        for (std::size_t i = 1; i < n; ++i) acc += x[i];
        return acc;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& x) {
    return pairwise_sum(x.data(), x.size());
}

struct SampleStats {
    std::size_t n = 0;
    double mean = 0.0;
    double variance = 0.0; // unbiased
    double std_error = 0.0;
};

inline SampleStats summarize(const std::vector<double>& x) {
    SampleStats s;
    s.n = x.size();
    if (s.n == 0) return s;
    s.mean = pairwise_sum(x) / static_cast<double>(s.n);
    if (s.n > 1) {
        std::vector<double> dev2(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - s.mean;
            dev2[i] = d * d;
        }
        s.variance = pairwise_sum(dev2) / static_cast<double>(s.n - 1);
        s.std_error = std::sqrt(s.variance / static_cast<double>(s.n));
    }
    return s;
}

/// Kolmogorov survival function Q(x) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2).
inline double kolmogorov_sf(double x) {
    if (x < 0.05) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        sum += sign * term;
        if (term < 1e-16) break;
        sign = -sign;
    }
    return std::min(1.0, std::max(0.0, 2.0 * sum));
}

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};

/// One-sample Kolmogorov-Smirnov test against a fully specified CDF.
inline KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf) {
    KsResult r;
    r.n = sample.size();
    if (r.n == 0) throw std::invalid_argument("ks_test: empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(r.n);
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max(d, f - static_cast<double>(i) / n);
        d = std::max(d, static_cast<double>(i + 1) / n - f);
    }
    r.statistic = d;
    const double sn = std::sqrt(n);
    r.p_value = kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d);
    return r;
}

} // namespace cylsde

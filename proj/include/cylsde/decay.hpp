#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace cylsde {

enum class SumStatus { Converges, Diverges, Inconclusive };

inline const char* to_string(SumStatus s) {
    switch (s) {
        case SumStatus::Converges: return "Converges";
        case SumStatus::Diverges: return "Diverges";
        default: return "Inconclusive";
    }
}

/// Outcome of a numerically evaluated infinite sum. Converges requires a
/// certified tail bound (p-series integral test or geometric sum); a partial
/// sum that merely stagnates stays Inconclusive.
struct ConvergenceVerdict {
    SumStatus status = SumStatus::Inconclusive;
    double partial_sum = 0.0;
    long terms_used = 0;
    std::optional<double> tail_bound; // upper bound on the omitted tail when certified
};

/// Deterministic decay rule j -> a * j^{-p} (Power) or j -> a * r^j (Geometric),
/// j >= 1. Closed under the |.|^q and same-kind-product operations the series
/// bookkeeping needs; anything outside that algebra falls back to numerics.
struct DecayRule {
    enum class Kind { Power, Geometric };
    Kind kind = Kind::Power;
    double a = 1.0;
    double rate = 0.0; // p for Power (exponent of j^{-p}), r for Geometric

    static DecayRule power(double a, double p) { return DecayRule{Kind::Power, a, p}; }
    static DecayRule geometric(double a, double r) {
        if (!(r > 0.0)) throw std::invalid_argument("DecayRule: geometric ratio must be > 0");
        return DecayRule{Kind::Geometric, a, r};
    }
    static DecayRule constant(double a) { return power(a, 0.0); }

    double at(long j) const {
        if (j < 1) throw std::domain_error("DecayRule: index must be >= 1");
        if (kind == Kind::Power) return a * std::pow(static_cast<double>(j), -rate);
        return a * std::pow(rate, static_cast<double>(j));
    }

    DecayRule abs_pow(double q) const {
        if (kind == Kind::Power) return power(std::pow(std::fabs(a), q), rate * q);
        return geometric(std::pow(std::fabs(a), q), std::pow(rate, q));
    }

    DecayRule scaled(double s) const {
        DecayRule r = *this;
        r.a *= s;
        return r;
    }

    static std::optional<DecayRule> product(const DecayRule& x, const DecayRule& y) {
        if (x.kind == Kind::Power && y.kind == Kind::Power)
            return power(x.a * y.a, x.rate + y.rate);
        if (x.kind == Kind::Geometric && y.kind == Kind::Geometric)
            return geometric(x.a * y.a, x.rate * y.rate);
        // Power * Geometric with nonnegative power exponent is dominated by the
        // geometric factor; good enough for a certified bound.
        const DecayRule& pw = (x.kind == Kind::Power) ? x : y;
        const DecayRule& ge = (x.kind == Kind::Power) ? y : x;
        if (pw.rate >= 0.0) return geometric(std::fabs(pw.a) * ge.a, ge.rate);
        return std::nullopt;
    }

    /// True when sum_j at(j) provably diverges (terms assumed nonnegative).
    bool sum_diverges() const {
        if (a == 0.0) return false;
        if (kind == Kind::Power) return rate <= 1.0;
        return rate >= 1.0;
    }

    /// Certified upper bound on sum_{j>N} at(j), for nonnegative terms.
    std::optional<double> tail_sum_bound(long N) const {
        if (a == 0.0) return 0.0;
        if (a < 0.0) return std::nullopt;
        if (kind == Kind::Power) {
            if (rate <= 1.0) return std::nullopt;
            // integral test: sum_{j>N} j^{-p} <= N^{1-p}/(p-1)
            return a * std::pow(static_cast<double>(N), 1.0 - rate) / (rate - 1.0);
        }
        if (rate >= 1.0) return std::nullopt;
        return a * std::pow(rate, static_cast<double>(N + 1)) / (1.0 - rate);
    }

    /// sup_j |at(j)| < inf, certified.
    bool bounded() const {
        if (a == 0.0) return true;
        if (kind == Kind::Power) return rate >= 0.0;
        return rate <= 1.0;
    }

    /// at(j) -> 0, certified.
    bool vanishes() const {
        if (a == 0.0) return true;
        if (kind == Kind::Power) return rate > 0.0;
        return rate < 1.0;
    }
};

/// Evaluate sum_{j=1..N} term(j) for nonnegative terms, attaching a certified
/// verdict from `rule` when the caller can supply one that matches (or bounds)
/// the terms. Without a rule, divergence is only declared by the blow-up
/// ceiling; everything else is Inconclusive.
inline ConvergenceVerdict sum_nonnegative(const std::function<double(long)>& term, long N,
                                          std::optional<DecayRule> rule,
                                          double divergence_ratio = 1e6) {
    if (N < 1) throw std::invalid_argument("sum_nonnegative: N must be >= 1");
    ConvergenceVerdict v;
    v.terms_used = N;
    double sum = 0.0;
    double sum_at_tenth = 0.0;
    const long tenth = std::max<long>(1, N / 10);
    bool all_zero = true;
    for (long j = 1; j <= N; ++j) {
        const double t = term(j);
        if (t < 0.0 || std::isnan(t))
            throw std::domain_error("sum_nonnegative: term not nonnegative at j=" + std::to_string(j));
        if (std::isinf(t)) { // an infinite term settles a nonnegative series
            v.status = SumStatus::Diverges;
            v.partial_sum = std::numeric_limits<double>::infinity();
            v.terms_used = j;
            return v;
        }
        if (t != 0.0) all_zero = false;
        sum += t;
        if (j == tenth) sum_at_tenth = sum;
    }
    v.partial_sum = sum;
    if (rule) {
        if (rule->sum_diverges() && !all_zero) {
            v.status = SumStatus::Diverges;
            return v;
        }
        if (auto tb = rule->tail_sum_bound(N)) {
            v.status = SumStatus::Converges;
            v.tail_bound = *tb;
            return v;
        }
    }
    if (sum_at_tenth > 0.0 && sum > divergence_ratio * sum_at_tenth) {
        v.status = SumStatus::Diverges;
        return v;
    }
    v.status = SumStatus::Inconclusive;
    return v;
}

} // namespace cylsde

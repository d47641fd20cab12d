#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cylsde/decay.hpp"
#include "cylsde/levy1d.hpp"
#include "cylsde/matrix.hpp"
#include "cylsde/parallel.hpp"
#include "cylsde/random.hpp"
#include "cylsde/stats.hpp"

namespace cylsde::cylnoise {

using levy1d::JumpEvent;
using levy1d::LevyMeasureModel;
using levy1d::LevyTriplet;
using levy1d::MeasureKind;

/// Closed-form diagonal model: independent components ell_j = sigma_j h_j with
/// a shared family and a decay rule for (sigma_j). Everything the series
/// checkers certify analytically flows from this description.
struct ClosedFormSpec {
    MeasureKind family = MeasureKind::SymmetricStable;
    double alpha = 1.0;
    DecayRule sigma = DecayRule::constant(1.0);
    double intensity_c = 0.0; // one-sided stable
    double pareto_x0 = 1.0;   // regularly varying
    double fa_rate = 0.0;     // finite activity
    std::shared_ptr<const levy1d::TabulatedLaw> fa_law; // base law, scaled by sigma_j
    double gaussian_s = 0.0;  // constant Gaussian variance added to every coordinate

    LevyTriplet make_triplet(long j) const {
        const double sj = sigma.at(j);
        switch (family) {
            case MeasureKind::SymmetricStable:
                return LevyTriplet(0.0, gaussian_s, LevyMeasureModel::symmetric_stable(alpha, sj));
            case MeasureKind::OneSidedStable: {
                if (sj == 0.0) return LevyTriplet(0.0, gaussian_s, LevyMeasureModel::none());
                auto m = LevyMeasureModel::one_sided_stable(alpha, sj, intensity_c);
                const double b = m.canonical_drift();
                return LevyTriplet(b, gaussian_s, std::move(m));
            }
            case MeasureKind::RegularlyVarying: {
                if (sj == 0.0) return LevyTriplet(0.0, gaussian_s, LevyMeasureModel::none());
                auto m = LevyMeasureModel::regularly_varying(alpha, sj, pareto_x0);
                const double b = m.canonical_drift();
                return LevyTriplet(b, gaussian_s, std::move(m));
            }
            case MeasureKind::FiniteActivity: {
                if (!fa_law) throw std::invalid_argument("ClosedFormSpec: finite activity needs a law");
                auto m = LevyMeasureModel::finite_activity(fa_rate, fa_law->scaled(sj));
                const double b = m.canonical_drift();
                return LevyTriplet(b, gaussian_s, std::move(m));
            }
        }
        throw std::logic_error("unreachable");
    }
};

inline double sigma_sup(const ClosedFormSpec& spec) {
    const auto abs_rule = spec.sigma.abs_pow(1.0);
    return abs_rule.bounded() ? abs_rule.at(1) : std::numeric_limits<double>::infinity();
}

/// True when the closed-form spec describes the zero jump measure.
inline bool zero_measure(const ClosedFormSpec& spec) {
    if (spec.family == MeasureKind::FiniteActivity) return spec.fa_rate == 0.0;
    return spec.sigma.a == 0.0;
}

/// The diagonal cylindrical Levy process L(t)u = sum_j ell_j(t) <u, e_j>.
/// component(j) is pure in j; triplets are memoized behind a mutex so the
/// object can be shared across Monte Carlo workers. Handles are cheap copies
/// of one shared state.
class DiagonalCylindricalLevy {
    struct State {
        std::function<LevyTriplet(long)> gen;
        std::optional<ClosedFormSpec> spec;
        mutable std::mutex mu;
        mutable std::deque<LevyTriplet> cache;
    };

public:
    static DiagonalCylindricalLevy closed_form(ClosedFormSpec spec) {
        DiagonalCylindricalLevy L;
        L.st_ = std::make_shared<State>();
        L.st_->spec = std::move(spec);
        const ClosedFormSpec sp = *L.st_->spec;
        L.st_->gen = [sp](long j) { return sp.make_triplet(j); };
        return L;
    }

    static DiagonalCylindricalLevy from_generator(std::function<LevyTriplet(long)> gen) {
        DiagonalCylindricalLevy L;
        L.st_ = std::make_shared<State>();
        L.st_->gen = std::move(gen);
        return L;
    }

    LevyTriplet component(long j) const {
        if (j < 1) throw std::domain_error("component: j must be >= 1");
        std::lock_guard<std::mutex> lock(st_->mu);
        while (static_cast<long>(st_->cache.size()) < j)
            st_->cache.push_back(st_->gen(static_cast<long>(st_->cache.size()) + 1));
        return st_->cache[static_cast<std::size_t>(j - 1)];
    }

    long materialized() const {
        std::lock_guard<std::mutex> lock(st_->mu);
        return static_cast<long>(st_->cache.size());
    }

    const std::optional<ClosedFormSpec>& closed_form_spec() const { return st_->spec; }

    /// Tail mass of coordinate j above y; closed-form fast path avoids
    /// materializing triplets inside the large-N series checkers.
    double tail_mass_at(long j, double y) const {
        const auto& spec = st_->spec;
        if (spec && spec->family != MeasureKind::FiniteActivity) {
            const double sj = std::fabs(spec->sigma.at(j));
            if (sj == 0.0) return 0.0;
            switch (spec->family) {
                case MeasureKind::SymmetricStable:
                    return std::pow(sj, spec->alpha) * std::pow(y, -spec->alpha) / spec->alpha;
                case MeasureKind::OneSidedStable: {
                    const double A = spec->intensity_c / levy1d::one_sided_density_norm(spec->alpha);
                    return A * std::pow(sj, spec->alpha) * std::pow(y, -spec->alpha) / spec->alpha;
                }
                case MeasureKind::RegularlyVarying: {
                    const double t = spec->pareto_x0 * sj / y;
                    return t >= 1.0 ? 1.0 : std::pow(t, spec->alpha);
                }
                default:
                    break;
            }
        }
        return component(j).measure.tail_mass(y);
    }

private:
    std::shared_ptr<State> st_;
};

/// Positive bounded weights c = (c_j). A decay rule, when present, feeds the
/// certified tail bounds; sup_bound certifies c in ell^infty.
struct WeightSequence {
    std::function<double(long)> fn;
    std::optional<DecayRule> rule;
    double sup_bound = 0.0;

    static WeightSequence from_rule(DecayRule r) {
        if (!(r.a > 0.0)) throw std::invalid_argument("WeightSequence: coefficient must be > 0");
        if (!r.bounded()) throw std::invalid_argument("WeightSequence: rule unbounded, c must lie in ell^infty");
        WeightSequence w;
        w.rule = r;
        w.fn = [r](long j) { return r.at(j); };
        w.sup_bound = r.at(1); // bounded power/geometric rules are nonincreasing
        return w;
    }

    static WeightSequence constant(double c) { return from_rule(DecayRule::constant(c)); }

    /// The critical weights c_j = |sigma_j|^{alpha/(2-alpha)} that compensate
    /// stable-type tails.
    static WeightSequence critical_for(const ClosedFormSpec& spec) {
        return from_rule(spec.sigma.abs_pow(spec.alpha / (2.0 - spec.alpha)));
    }

    /// Weight at j. A value that underflowed to +0 is returned as-is (the
    /// mathematical c_j is positive; consumers read k/c_j = +inf as "threshold
    /// beyond every jump"); negative or out-of-bound weights are rejected.
    double at(long j) const {
        const double c = fn(j);
        if (c < 0.0 || std::isnan(c) || c > sup_bound * (1.0 + 1e-12))
            throw std::domain_error("WeightSequence: weight outside [0, sup_bound] at j=" + std::to_string(j));
        return c;
    }
};

// ---------------------------------------------------------------------------
// Series validity conditions and truncation admissibility
// ---------------------------------------------------------------------------

struct SeriesConditionReport {
    ConvergenceVerdict cond1; // sum over the drift/annulus interplay terms
    ConvergenceVerdict cond2; // (s_j) in ell^infty; partial_sum carries the sup
    ConvergenceVerdict cond3; // sum int (|a_j x|^2 /\ 1) rho_j
    bool all_pass() const {
        return cond1.status == SumStatus::Converges && cond2.status == SumStatus::Converges &&
               cond3.status == SumStatus::Converges;
    }
};

namespace detail {

inline std::optional<DecayRule> product_pow_rule(const std::optional<DecayRule>& x,
                                                 const std::optional<DecayRule>& y,
                                                 double exponent, double scale) {
    if (!x || !y) return std::nullopt;
    auto prod = DecayRule::product(*x, *y);
    if (!prod) return std::nullopt;
    return prod->abs_pow(exponent).scaled(scale);
}

inline double one_sided_A(const ClosedFormSpec& spec) {
    return spec.intensity_c / levy1d::one_sided_density_norm(spec.alpha);
}

} // namespace detail

/// Evaluate the three series validity conditions of the diagonal model against
/// a square-summable test sequence (alpha_j); non-square-summable rules are
/// rejected. `tol` is the absolute accuracy wanted from certified sums: N is
/// grown (up to 10x) until the certified tail bound drops below it.
inline SeriesConditionReport check_series_conditions(const DiagonalCylindricalLevy& L,
                                                     const DecayRule& alpha_rule, long N,
                                                     double tol = 1e-10) {
    if (N < 1) throw std::invalid_argument("check_series_conditions: N must be >= 1");
    if (!alpha_rule.abs_pow(2.0).tail_sum_bound(1))
        throw std::invalid_argument("check_series_conditions: alpha rule is not square-summable");

    const auto& spec = L.closed_form_spec();

    auto term1 = [&](long j) {
        const double aj = std::fabs(alpha_rule.at(j));
        if (aj == 0.0 || aj > 1.0) return 0.0;
        const LevyTriplet t = L.component(j);
        return aj * std::fabs(t.drift_b + t.measure.annulus_first_moment(1.0, 1.0 / aj));
    };
    auto term3 = [&](long j) {
        const double aj = std::fabs(alpha_rule.at(j));
        if (aj == 0.0) return 0.0;
        const LevyTriplet t = L.component(j);
        const double inv = 1.0 / aj;
        return aj * aj * t.measure.truncated_second_moment(inv) + t.measure.tail_mass(inv);
    };

    std::optional<DecayRule> rule1, rule3;
    if (spec && zero_measure(*spec)) {
        rule1 = DecayRule::constant(0.0);
        rule3 = DecayRule::constant(0.0);
    } else if (spec) {
        switch (spec->family) {
            case MeasureKind::SymmetricStable:
                rule1 = DecayRule::constant(0.0);
                rule3 = detail::product_pow_rule(spec->sigma, alpha_rule, spec->alpha,
                                                 2.0 / (spec->alpha * (2.0 - spec->alpha)));
                break;
            case MeasureKind::OneSidedStable: {
                const double A = detail::one_sided_A(*spec);
                rule1 = detail::product_pow_rule(spec->sigma, alpha_rule, spec->alpha,
                                                 A / std::fabs(1.0 - spec->alpha));
                rule3 = detail::product_pow_rule(spec->sigma, alpha_rule, spec->alpha,
                                                 A * 2.0 / (spec->alpha * (2.0 - spec->alpha)));
                break;
            }
            case MeasureKind::FiniteActivity: {
                // Beyond J* with |alpha_J sigma_J| max|Q| < 1 the tail factor is
                // exactly zero, and the remaining piece is bounded by
                // a_j^2 * rate * sup sigma^2 * E[Q^2].
                if (spec->fa_law && spec->sigma.bounded() && alpha_rule.vanishes()) {
                    const double eq2 = spec->fa_law->abs_band_moment(
                        0.0, std::numeric_limits<double>::infinity(), 2);
                    const double ssup = sigma_sup(*spec);
                    if (std::fabs(alpha_rule.at(N)) * ssup * spec->fa_law->max_abs() < 1.0)
                        rule3 = alpha_rule.abs_pow(2.0).scaled(spec->fa_rate * eq2 * ssup * ssup);
                }
                break;
            }
            default:
                break;
        }
    }

    long n_use = N;
    SeriesConditionReport rep;
    for (int attempt = 0; attempt < 4; ++attempt) {
        rep.cond1 = sum_nonnegative(term1, n_use, rule1);
        rep.cond3 = sum_nonnegative(term3, n_use, rule3);
        const bool need_more = (rep.cond1.tail_bound && *rep.cond1.tail_bound > tol) ||
                               (rep.cond3.tail_bound && *rep.cond3.tail_bound > tol);
        if (!need_more || n_use >= 10 * N) break;
        n_use = std::min(10 * N, n_use * 4);
    }

    // cond2: boundedness of the Gaussian variances
    double sup_s = 0.0;
    const long probe = std::min<long>(n_use, 1000);
    for (long j = 1; j <= probe; ++j) sup_s = std::max(sup_s, L.component(j).gaussian_s);
    rep.cond2.partial_sum = spec ? spec->gaussian_s : sup_s;
    rep.cond2.terms_used = spec ? 1 : probe;
    rep.cond2.status = spec ? SumStatus::Converges : SumStatus::Inconclusive;
    if (spec) rep.cond2.tail_bound = 0.0;
    return rep;
}

struct MCResult {
    double value = 0.0;
    ConvergenceVerdict verdict;
};

/// m^c(k) = sum_j rho_j({|x| > k/c_j}); partial sum over j <= N with a
/// certified verdict when the closed-form family and weight rule admit one.
inline MCResult m_c(const DiagonalCylindricalLevy& L, const WeightSequence& c, double k, long N,
                    double divergence_ratio = 1e6) {
    if (!(k > 0.0)) throw std::domain_error("m_c: k must be > 0");
    auto term = [&](long j) { return L.tail_mass_at(j, k / c.at(j)); };

    std::optional<DecayRule> rule;
    const auto& spec = L.closed_form_spec();
    if (spec && zero_measure(*spec)) rule = DecayRule::constant(0.0);
    else if (spec && c.rule) {
        switch (spec->family) {
            case MeasureKind::SymmetricStable:
                rule = detail::product_pow_rule(spec->sigma, c.rule, spec->alpha,
                                                std::pow(k, -spec->alpha) / spec->alpha);
                break;
            case MeasureKind::OneSidedStable:
                rule = detail::product_pow_rule(
                    spec->sigma, c.rule, spec->alpha,
                    detail::one_sided_A(*spec) * std::pow(k, -spec->alpha) / spec->alpha);
                break;
            case MeasureKind::RegularlyVarying:
                // unclamped power form dominates min(1, .) and matches it once < 1
                rule = detail::product_pow_rule(spec->sigma, c.rule, spec->alpha,
                                                std::pow(spec->pareto_x0 / k, spec->alpha));
                break;
            case MeasureKind::FiniteActivity:
                break;
        }
    }

    MCResult r;
    r.verdict = sum_nonnegative(term, N, rule, divergence_ratio);
    r.value = r.verdict.partial_sum;

    // finite-activity zero-tail certificate: c nonincreasing and k/c_N already
    // clears every possible jump size, so all later terms vanish exactly
    if (r.verdict.status == SumStatus::Inconclusive && spec &&
        spec->family == MeasureKind::FiniteActivity && spec->fa_law && c.rule &&
        spec->sigma.bounded()) {
        const double reach = spec->fa_law->max_abs() * sigma_sup(*spec);
        if (k / c.at(N) >= reach) {
            r.verdict.status = SumStatus::Converges;
            r.verdict.tail_bound = 0.0;
        }
    }
    return r;
}

struct BoundednessReport {
    SumStatus status = SumStatus::Inconclusive; // Converges = bounded, Diverges = unbounded
    double sup_observed = 0.0;
    std::optional<double> sup_certified;
};

struct AdmissibilityReport {
    std::vector<std::pair<double, ConvergenceVerdict>> drift_sq; // (a) per k
    std::vector<std::pair<double, BoundednessReport>> var_sup;   // (b) per k
    std::vector<std::pair<double, MCResult>> mc;                 // (c) per k
    bool mc_nonincreasing = false;
    bool mc_limit_zero_certified = false;
    SumStatus a_status = SumStatus::Inconclusive;
    SumStatus b_status = SumStatus::Inconclusive;
    SumStatus c_status = SumStatus::Inconclusive;
    std::string diagnostic;

    bool passed() const {
        return a_status == SumStatus::Converges && b_status == SumStatus::Converges &&
               c_status == SumStatus::Converges;
    }
    bool violated() const {
        return a_status == SumStatus::Diverges || b_status == SumStatus::Diverges ||
               c_status == SumStatus::Diverges;
    }
};

/// Admissibility of the weights for the truncation decomposition:
/// (a) the drift coordinates (p_j^{c,k}) lie in ell^2, (b) the truncated second
/// moments are bounded over j, (c) the large-jump mass m^c(k) -> 0 along k_list.
inline AdmissibilityReport check_admissibility(const DiagonalCylindricalLevy& L, const WeightSequence& c,
                                    std::vector<double> k_list = {1, 2, 4, 8, 16},
                                    long N = 10000) {
    if (k_list.empty()) throw std::invalid_argument("check_admissibility: k_list empty");
    for (std::size_t i = 0; i < k_list.size(); ++i) {
        if (!(k_list[i] > 0.0)) throw std::invalid_argument("check_admissibility: k must be > 0");
        if (i > 0 && k_list[i] <= k_list[i - 1])
            throw std::invalid_argument("check_admissibility: k_list must ascend");
    }
    const auto& spec = L.closed_form_spec();
    AdmissibilityReport rep;

    auto merge = [](SumStatus& all, SumStatus s) {
        if (s == SumStatus::Diverges) all = SumStatus::Diverges;
        else if (s == SumStatus::Inconclusive && all != SumStatus::Diverges)
            all = SumStatus::Inconclusive;
    };

    // (a) drift coordinates in ell^2, per k
    rep.a_status = SumStatus::Converges;
    for (double k : k_list) {
        auto term = [&](long j) {
            const LevyTriplet t = L.component(j);
            const double p = t.drift_b + t.measure.annulus_first_moment(1.0, k / c.at(j));
            return p * p;
        };
        std::optional<DecayRule> rule;
        if (spec && zero_measure(*spec)) {
            rule = DecayRule::constant(0.0);
        } else if (spec && c.rule) {
            if (spec->family == MeasureKind::SymmetricStable) {
                rule = DecayRule::constant(0.0);
            } else if (spec->family == MeasureKind::OneSidedStable) {
                // p_j = (A/(1-alpha)) k^{1-alpha} sigma_j |sigma_j|^{alpha-1} c_j^{alpha-1}
                const double A = detail::one_sided_A(*spec);
                const double coef = A / (1.0 - spec->alpha) * std::pow(k, 1.0 - spec->alpha);
                rule = detail::product_pow_rule(spec->sigma.abs_pow(2.0 * spec->alpha),
                                                c.rule->abs_pow(2.0 * spec->alpha - 2.0), 1.0,
                                                coef * coef);
            }
        }
        auto v = sum_nonnegative(term, std::min<long>(N, 4000), rule);
        merge(rep.a_status, v.status);
        rep.drift_sq.emplace_back(k, v);
    }

    // (b) sup_j of the truncated second moments, per k
    rep.b_status = SumStatus::Converges;
    for (double k : k_list) {
        BoundednessReport b;
        const long probe = std::min<long>(N, 2000);
        for (long j = 1; j <= probe; ++j) {
            const LevyTriplet t = L.component(j);
            b.sup_observed = std::max(b.sup_observed, t.measure.truncated_second_moment(k / c.at(j)));
        }
        if (spec && c.rule &&
            (spec->family == MeasureKind::SymmetricStable ||
             spec->family == MeasureKind::OneSidedStable)) {
            const double A =
                spec->family == MeasureKind::SymmetricStable ? 1.0 : detail::one_sided_A(*spec);
            auto rule = detail::product_pow_rule(spec->sigma.abs_pow(spec->alpha),
                                                 c.rule->abs_pow(spec->alpha - 2.0), 1.0,
                                                 A * std::pow(k, 2.0 - spec->alpha) / (2.0 - spec->alpha));
            if (rule) {
                if (rule->bounded()) {
                    b.status = SumStatus::Converges;
                    b.sup_certified = std::max(std::fabs(rule->at(1)), b.sup_observed);
                } else {
                    b.status = SumStatus::Diverges;
                }
            }
        } else if (spec && spec->family == MeasureKind::FiniteActivity && spec->fa_law &&
                   spec->sigma.bounded()) {
            const double ssup = sigma_sup(*spec);
            const double eq2 =
                spec->fa_law->abs_band_moment(0.0, std::numeric_limits<double>::infinity(), 2);
            b.status = SumStatus::Converges;
            b.sup_certified = spec->fa_rate * ssup * ssup * eq2;
        }
        merge(rep.b_status, b.status);
        rep.var_sup.emplace_back(k, b);
    }

    // (c) m^c(k) -> 0 along k_list
    rep.c_status = SumStatus::Converges;
    for (double k : k_list) {
        auto r = m_c(L, c, k, N);
        merge(rep.c_status, r.verdict.status);
        rep.mc.emplace_back(k, r);
    }
    rep.mc_nonincreasing = true;
    for (std::size_t i = 1; i < rep.mc.size(); ++i)
        if (rep.mc[i].second.value > rep.mc[i - 1].second.value * (1.0 + 1e-12))
            rep.mc_nonincreasing = false;
    // stable families scale as k^{-alpha}; RV is dominated by the unclamped
    // power form; finite activity vanishes once k clears the bounded law
    rep.mc_limit_zero_certified = (spec && c.rule && rep.c_status == SumStatus::Converges);
    if (rep.c_status == SumStatus::Converges &&
        (!rep.mc_nonincreasing || !rep.mc_limit_zero_certified))
        rep.c_status = SumStatus::Inconclusive;

    std::ostringstream diag;
    auto describe = [&](const char* name, SumStatus s) {
        if (s != SumStatus::Converges) diag << "admissibility(" << name << ") " << to_string(s) << "; ";
    };
    describe("a", rep.a_status);
    describe("b", rep.b_status);
    describe("c", rep.c_status);
    if (rep.c_status == SumStatus::Diverges) {
        for (auto& [k, r] : rep.mc)
            if (r.verdict.status == SumStatus::Diverges) {
                diag << "m^c(" << k << ") diverges (partial sum " << r.value << " over "
                     << r.verdict.terms_used << " terms)";
                break;
            }
    }
    rep.diagnostic = diag.str();
    return rep;
}

// ---------------------------------------------------------------------------
// Truncation decomposition L = P + M + R
// ---------------------------------------------------------------------------

struct TruncationDecomposition {
    double level_k = 0.0;
    WeightSequence weights;
    std::function<double(long)> drift_p;            // p_j^{c,k}(1)
    std::function<double(long)> martingale_var;     // diagonal of Q_k
    std::function<double(long)> residual_threshold; // k/c_j

    std::vector<double> q_diag(long n) const {
        std::vector<double> q(static_cast<std::size_t>(n));
        for (long j = 1; j <= n; ++j) q[static_cast<std::size_t>(j - 1)] = martingale_var(j);
        return q;
    }
    std::vector<double> drift_vector(long n) const {
        std::vector<double> p(static_cast<std::size_t>(n));
        for (long j = 1; j <= n; ++j) p[static_cast<std::size_t>(j - 1)] = drift_p(j);
        return p;
    }
};

class DecompositionError : public std::runtime_error {
public:
    explicit DecompositionError(const std::string& what) : std::runtime_error(what) {}
};

inline TruncationDecomposition decompose(const DiagonalCylindricalLevy& L, const WeightSequence& c,
                                         double k, bool force = false, long N_check = 4000) {
    if (!(k > 0.0)) throw std::domain_error("decompose: k must be > 0");
    if (!force) {
        auto rep = check_admissibility(L, c, {k, 2 * k, 4 * k, 8 * k, 16 * k}, N_check);
        if (!rep.passed())
            throw DecompositionError(std::string("decompose: admissibility conditions not verified (") +
                                     (rep.violated() ? "violated" : "inconclusive") +
                                     "): " + rep.diagnostic);
    }
    TruncationDecomposition d;
    d.level_k = k;
    d.weights = c;
    d.drift_p = [L, c, k](long j) {
        const LevyTriplet t = L.component(j);
        return t.drift_b + t.measure.annulus_first_moment(1.0, k / c.at(j));
    };
    d.martingale_var = [L, c, k](long j) {
        const LevyTriplet t = L.component(j);
        return t.gaussian_s + t.measure.truncated_second_moment(k / c.at(j));
    };
    d.residual_threshold = [c, k](long j) { return k / c.at(j); };
    return d;
}

// ---------------------------------------------------------------------------
// Path sampling with one shared jump record per coordinate
// ---------------------------------------------------------------------------

/// Grid + per-cell increments of the square-integrable part L^c_k = P + M,
/// explicit residual jump records, and the raw materials (master jump record,
/// Gaussian draws) needed to re-materialize the same path at another
/// truncation level with coupled randomness.
struct SamplePath {
    std::vector<double> grid;
    long n = 0;
    double level_k = 0.0;
    double min_level = 0.0;
    std::vector<double> drift_rate; // p_j^{c,k}
    std::vector<double> comp_rate;  // int_{eps<|x|<=k/c_j} x rho_j
    Matrix mart;                    // M x n martingale increments at level_k
    std::vector<std::vector<JumpEvent>> residual; // jumps above k/c_j
    std::vector<std::vector<JumpEvent>> record;   // master record: all jumps above eps_j
    std::vector<double> ar_cutoff;  // eps_j
    std::vector<double> ar_var;     // v_j(eps_j), Gaussian substitute variance rate
    Matrix raw_bm;                  // sqrt(s_j dt) Z draws
    Matrix raw_ar;                  // sqrt(v_j dt) Z draws
    std::uint64_t master_seed = 0;
    long path_index = 0;

    int cells() const { return static_cast<int>(grid.size()) - 1; }
    double T() const { return grid.back(); }
    double dt(int m) const {
        return grid[static_cast<std::size_t>(m) + 1] - grid[static_cast<std::size_t>(m)];
    }

    double mart_increment(int m, long j) const { return mart(m, static_cast<int>(j - 1)); }
    double increment(int m, long j) const {
        return drift_rate[static_cast<std::size_t>(j - 1)] * dt(m) + mart(m, static_cast<int>(j - 1));
    }
    std::vector<double> increment_row(int m) const {
        std::vector<double> row(static_cast<std::size_t>(n));
        for (long j = 1; j <= n; ++j) row[static_cast<std::size_t>(j - 1)] = increment(m, j);
        return row;
    }
    std::vector<double> mart_row(int m) const {
        std::vector<double> row(static_cast<std::size_t>(n));
        for (long j = 1; j <= n; ++j) row[static_cast<std::size_t>(j - 1)] = mart_increment(m, j);
        return row;
    }

    double residual_sum_in_cell(int m, long j) const {
        double s = 0.0;
        for (const auto& e : residual[static_cast<std::size_t>(j - 1)])
            if (e.time > grid[static_cast<std::size_t>(m)] &&
                e.time <= grid[static_cast<std::size_t>(m) + 1])
                s += e.size;
        return s;
    }

    /// Increment of the full coordinate process ell_j over cell m:
    /// P-part + M-part + residual jumps, summed in that fixed order.
    double total_increment(int m, long j) const {
        return increment(m, j) + residual_sum_in_cell(m, j);
    }

    /// First residual jump time at this level, +inf when none.
    double first_residual_time() const {
        double t = std::numeric_limits<double>::infinity();
        for (const auto& coord : residual)
            if (!coord.empty()) t = std::min(t, coord.front().time);
        return t;
    }

    bool has_residual() const {
        for (const auto& coord : residual)
            if (!coord.empty()) return true;
        return false;
    }
};

struct PathSpec {
    double T = 1.0;
    int steps = 100;
    std::vector<double> extra_times; // refined into the grid (breakpoints etc.)
    double min_level = 0.0;          // smallest level the path must support (0 = sampling level)
    double ar_variance_ratio = 1e-4; // Gaussian-substituted variance <= ratio * truncated variance
};

namespace detail {

inline std::vector<double> build_grid(double T, int steps, const std::vector<double>& marks) {
    if (!(T > 0.0) || steps < 1) throw std::invalid_argument("build_grid: need T > 0, steps >= 1");
    std::vector<double> g;
    g.reserve(static_cast<std::size_t>(steps) + marks.size() + 1);
    g.push_back(0.0);
    for (int i = 1; i < steps; ++i) g.push_back(T * static_cast<double>(i) / steps);
    g.push_back(T); // exact endpoints
    for (double t : marks)
        if (t > 0.0 && t < T) g.push_back(t);
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
}

} // namespace detail

/// Re-materialize drift/compensation/martingale/residual data at level k from
/// the path's raw coupling materials. Requires k/c_j >= eps_j per coordinate.
inline void materialize_level(SamplePath& p, const DiagonalCylindricalLevy& L,
                              const WeightSequence& c, double k) {
    const int M = p.cells();
    const long n = p.n;
    p.level_k = k;
    p.drift_rate.assign(static_cast<std::size_t>(n), 0.0);
    p.comp_rate.assign(static_cast<std::size_t>(n), 0.0);
    p.residual.assign(static_cast<std::size_t>(n), {});
    if (p.mart.rows != M || p.mart.cols != static_cast<int>(n)) p.mart = Matrix(M, static_cast<int>(n));
    for (long j = 1; j <= n; ++j) {
        const LevyTriplet t = L.component(j);
        const double cj = c.at(j);
        const double kappa = k / cj;
        const double eps = p.ar_cutoff[static_cast<std::size_t>(j - 1)];
        if (kappa < eps)
            throw std::invalid_argument("materialize_level: level below the record's AR cutoff");
        p.drift_rate[static_cast<std::size_t>(j - 1)] =
            t.drift_b + t.measure.annulus_first_moment(1.0, kappa);
        p.comp_rate[static_cast<std::size_t>(j - 1)] = t.measure.annulus_first_moment(eps, kappa);
        auto& res = p.residual[static_cast<std::size_t>(j - 1)];
        const auto& rec = p.record[static_cast<std::size_t>(j - 1)];
        std::size_t ptr = 0;
        for (int m = 0; m < M; ++m) {
            const double lo = p.grid[static_cast<std::size_t>(m)];
            const double hi = p.grid[static_cast<std::size_t>(m) + 1];
            double small_sum = 0.0;
            while (ptr < rec.size() && rec[ptr].time <= hi) {
                if (rec[ptr].time > lo) {
                    if (std::fabs(rec[ptr].size) > kappa) res.push_back(rec[ptr]);
                    else small_sum += rec[ptr].size;
                }
                ++ptr;
            }
            p.mart(m, static_cast<int>(j - 1)) =
                p.raw_bm(m, static_cast<int>(j - 1)) + p.raw_ar(m, static_cast<int>(j - 1)) +
                small_sum - (hi - lo) * p.comp_rate[static_cast<std::size_t>(j - 1)];
        }
    }
}

inline SamplePath sample_path(const DiagonalCylindricalLevy& L, const WeightSequence& c, double k,
                              long n, const PathSpec& spec, std::uint64_t master_seed,
                              long path_index) {
    if (n < 1) throw std::invalid_argument("sample_path: n must be >= 1");
    const double min_level = spec.min_level > 0.0 ? spec.min_level : k;
    if (k < min_level) throw std::invalid_argument("sample_path: k below the path's min_level");

    SamplePath p;
    p.n = n;
    p.min_level = min_level;
    p.master_seed = master_seed;
    p.path_index = path_index;
    p.record.resize(static_cast<std::size_t>(n));
    p.ar_cutoff.resize(static_cast<std::size_t>(n));
    p.ar_var.resize(static_cast<std::size_t>(n));

    RandomStream base =
        RandomStream(master_seed).derive(static_cast<std::uint64_t>(path_index), 0x70617468);

    // master jump records, plus grid refinement marks at cylindrical jumps
    // above min_level so residual jumps land exactly on grid points
    std::vector<double> marks = spec.extra_times;
    for (long j = 1; j <= n; ++j) {
        const LevyTriplet t = L.component(j);
        const double cj = c.at(j);
        const double kappa_min = min_level / cj;
        const double eps = t.measure.ar_cutoff(kappa_min, spec.ar_variance_ratio);
        p.ar_cutoff[static_cast<std::size_t>(j - 1)] = eps;
        p.ar_var[static_cast<std::size_t>(j - 1)] =
            eps > 0.0 ? t.measure.truncated_second_moment(eps) : 0.0;
        RandomStream jumps = base.derive(static_cast<std::uint64_t>(j), 1);
        p.record[static_cast<std::size_t>(j - 1)] = t.measure.sample_jumps_above(eps, spec.T, jumps);
        for (const auto& e : p.record[static_cast<std::size_t>(j - 1)])
            if (std::fabs(cj * e.size) > min_level) marks.push_back(e.time);
    }

    p.grid = detail::build_grid(spec.T, spec.steps, marks);
    const int M = p.cells();

    p.raw_bm = Matrix(M, static_cast<int>(n));
    p.raw_ar = Matrix(M, static_cast<int>(n));
    for (long j = 1; j <= n; ++j) {
        const LevyTriplet t = L.component(j);
        RandomStream gauss = base.derive(static_cast<std::uint64_t>(j), 2);
        const double vr = p.ar_var[static_cast<std::size_t>(j - 1)];
        for (int m = 0; m < M; ++m) {
            const double d = p.dt(m);
            if (t.gaussian_s > 0.0)
                p.raw_bm(m, static_cast<int>(j - 1)) = std::sqrt(t.gaussian_s * d) * gauss.normal();
            if (vr > 0.0)
                p.raw_ar(m, static_cast<int>(j - 1)) = std::sqrt(vr * d) * gauss.normal();
        }
    }

    materialize_level(p, L, c, k);
    return p;
}

/// Same path, different truncation level; shares records and Gaussian draws.
inline SamplePath relevel(const SamplePath& path, const DiagonalCylindricalLevy& L,
                          const WeightSequence& c, double new_k) {
    SamplePath q = path;
    materialize_level(q, L, c, new_k);
    return q;
}

/// Branch the path at grid time t: keep everything up to t, resample all
/// randomness on (t, T] from `branch_stream`. Used by the martingale-property
/// checks; relies on independent increments.
inline SamplePath branch_after(const SamplePath& path, const DiagonalCylindricalLevy& L,
                               const WeightSequence& c, double t, RandomStream branch_stream) {
    SamplePath q = path;
    const double T = path.T();
    if (!(t >= 0.0 && t < T)) throw std::invalid_argument("branch_after: t outside [0,T)");
    int mt = -1;
    for (int i = 0; i < static_cast<int>(path.grid.size()); ++i)
        if (path.grid[static_cast<std::size_t>(i)] == t) mt = i;
    if (mt < 0) throw std::invalid_argument("branch_after: t must be a grid point");

    for (long j = 1; j <= path.n; ++j) {
        const LevyTriplet trip = L.component(j);
        auto& rec = q.record[static_cast<std::size_t>(j - 1)];
        rec.erase(std::remove_if(rec.begin(), rec.end(),
                                 [t](const JumpEvent& e) { return e.time > t; }),
                  rec.end());
        RandomStream jumps = branch_stream.derive(static_cast<std::uint64_t>(j), 1);
        const double eps = q.ar_cutoff[static_cast<std::size_t>(j - 1)];
        auto fresh = trip.measure.sample_jumps_above(eps, T - t, jumps);
        for (auto& e : fresh) {
            e.time += t;
            rec.push_back(e);
        }
        RandomStream gauss = branch_stream.derive(static_cast<std::uint64_t>(j), 2);
        const double vr = q.ar_var[static_cast<std::size_t>(j - 1)];
        for (int m = mt; m < q.cells(); ++m) {
            const double d = q.dt(m);
            q.raw_bm(m, static_cast<int>(j - 1)) =
                trip.gaussian_s > 0.0 ? std::sqrt(trip.gaussian_s * d) * gauss.normal() : 0.0;
            q.raw_ar(m, static_cast<int>(j - 1)) =
                vr > 0.0 ? std::sqrt(vr * d) * gauss.normal() : 0.0;
        }
    }
    materialize_level(q, L, c, path.level_k);
    return q;
}

// ---------------------------------------------------------------------------
// Jump-accumulation stopping times and the dichotomy test
// ---------------------------------------------------------------------------

/// Sample tau_n^c(k): per-coordinate large-jump records are superposed and the
/// merged record scanned for the first qualifying jump (independent coordinates
/// never jump together, so the first arrival is the minimum over coordinates).
/// Returns +inf when no qualifying jump occurs in (0, horizon].
inline double first_large_jump_time(const DiagonalCylindricalLevy& L, const WeightSequence& c,
                                    double k, long n, double horizon, const RandomStream& base) {
    if (n < 1) throw std::invalid_argument("first_large_jump_time: n must be >= 1");
    if (!(k > 0.0)) throw std::domain_error("first_large_jump_time: k must be > 0");
    double tau = std::numeric_limits<double>::infinity();
    for (long j = 1; j <= n; ++j) {
        const LevyTriplet t = L.component(j);
        RandomStream s = base.derive(static_cast<std::uint64_t>(j), 1);
        const auto rec = t.measure.sample_jumps_above(k / c.at(j), horizon, s);
        if (!rec.empty()) tau = std::min(tau, rec.front().time);
    }
    return tau;
}

enum class TailClassification { AlmostSurelyInfinite, Exponential, AccumulatesAtZero, Inconclusive };

inline const char* to_string(TailClassification c) {
    switch (c) {
        case TailClassification::AlmostSurelyInfinite: return "AlmostSurelyInfinite";
        case TailClassification::Exponential: return "Exponential";
        case TailClassification::AccumulatesAtZero: return "AccumulatesAtZero";
        default: return "Inconclusive";
    }
}

struct DichotomyReport {
    double lambda_analytic = 0.0; // lambda_n^k = sum_{j<=n} rho_j({|x| > k/c_j})
    MCResult m_full;              // m^c(k) partial sum + verdict (the n -> inf target)
    double lambda_hat = 0.0;      // censored MLE
    KsResult ks;
    bool ks_valid = false;
    TailClassification classification = TailClassification::Inconclusive;
    long n_paths = 0;
    long n_censored = 0;
    double horizon_used = 0.0;
    std::vector<double> taus;     // censored at horizon_used
    std::vector<char> censored;
};

/// Large-jump stopping-time dichotomy, finite-n version: samples tau_n^c(k) and tests the
/// uncensored values against the horizon-conditioned Exp(lambda_n^k) law.
/// Finite n samples tau_n, not the limit tau^c(k); the report carries both
/// lambda_n^k and the m^c(k) partial sum so the analytic gap is visible.
inline DichotomyReport dichotomy_test(const DiagonalCylindricalLevy& L, const WeightSequence& c,
                                      double k, long n, long n_paths, double horizon,
                                      std::uint64_t master_seed, int workers = 1,
                                      double lambda_ceiling = 1e6, long N_limit = 100000) {
    if (n_paths < 100) throw std::invalid_argument("dichotomy_test: n_paths must be >= 100");
    if (!(horizon > 0.0)) throw std::invalid_argument("dichotomy_test: horizon must be > 0");

    DichotomyReport rep;
    rep.n_paths = n_paths;

    double lambda = 0.0;
    for (long j = 1; j <= n; ++j) lambda += L.tail_mass_at(j, k / c.at(j));
    rep.lambda_analytic = lambda;
    rep.m_full = m_c(L, c, k, N_limit);

    // keep the expected record size per path bounded when the rate is huge
    double h = horizon;
    if (lambda > 0.0) h = std::min(horizon, 50.0 / lambda);
    rep.horizon_used = h;

    rep.taus.assign(static_cast<std::size_t>(n_paths), 0.0);
    rep.censored.assign(static_cast<std::size_t>(n_paths), 0);
    RandomStream root(master_seed);
    for_each_index(n_paths, workers, [&](long p) {
        RandomStream base = root.derive(static_cast<std::uint64_t>(p), 0x746175);
        const double tau = first_large_jump_time(L, c, k, n, h, base);
        if (std::isfinite(tau)) {
            rep.taus[static_cast<std::size_t>(p)] = tau;
        } else {
            rep.taus[static_cast<std::size_t>(p)] = h;
            rep.censored[static_cast<std::size_t>(p)] = 1;
        }
    });

    double time_total = 0.0;
    long uncensored = 0;
    std::vector<double> uncensored_taus;
    for (long p = 0; p < n_paths; ++p) {
        time_total += rep.taus[static_cast<std::size_t>(p)];
        if (!rep.censored[static_cast<std::size_t>(p)]) {
            ++uncensored;
            uncensored_taus.push_back(rep.taus[static_cast<std::size_t>(p)]);
        }
    }
    rep.n_censored = n_paths - uncensored;
    rep.lambda_hat = time_total > 0.0 ? static_cast<double>(uncensored) / time_total : 0.0;

    if (uncensored > 0 && lambda > 0.0) {
        const double denom = -std::expm1(-lambda * h); // P(tau <= h)
        rep.ks = ks_test(uncensored_taus, [lambda, denom](double t) {
            return -std::expm1(-lambda * t) / denom;
        });
        rep.ks_valid = true;
    }

    if (lambda == 0.0)
        rep.classification = TailClassification::AlmostSurelyInfinite;
    else if (rep.m_full.verdict.status == SumStatus::Diverges || lambda > lambda_ceiling)
        rep.classification = TailClassification::AccumulatesAtZero;
    else if (uncensored == 0)
        rep.classification = TailClassification::Inconclusive;
    else
        rep.classification = TailClassification::Exponential;
    return rep;
}

} // namespace cylsde::cylnoise

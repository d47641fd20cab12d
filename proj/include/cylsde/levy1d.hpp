#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cylsde/random.hpp"

namespace cylsde::levy1d {

inline constexpr double kPi = 3.14159265358979323846264338327950288;

/// c(alpha) = int_0^inf (1 - cos v) v^{-1-alpha} dv for alpha in (0,2).
/// Written as Gamma(2-alpha) * (pi/2) * sinc((pi/2)(1-alpha)) / alpha, which is
/// smooth through alpha = 1 (value pi/2 there).
inline double stable_cf_constant(double alpha) {
    const double x = 0.5 * kPi * (1.0 - alpha);
    const double sinc = std::fabs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
    return std::tgamma(2.0 - alpha) * 0.5 * kPi * sinc / alpha;
}

/// Normalisation constant -cos(alpha*pi/2) * Gamma(alpha) used to express the
/// one-sided stable density as (c / c_alpha) x^{-1-alpha}. Negative on (0,1),
/// positive on (1,2); only the ratio c/c_alpha enters the measure.
inline double one_sided_density_norm(double alpha) {
    return -std::cos(0.5 * kPi * alpha) * std::tgamma(alpha);
}

struct JumpEvent {
    double time = 0.0;
    double size = 0.0;
};

/// Piecewise-linear quantile function u -> Q(u), u ascending over [0,1],
/// Q nondecreasing. Moments against sub-ranges of |Q| are exact (the integrand
/// is polynomial per segment).
class TabulatedLaw {
public:
    TabulatedLaw(std::vector<double> u, std::vector<double> q) : u_(std::move(u)), q_(std::move(q)) {
        validate();
    }

    /// Two whitespace-separated columns "u quantile", '#' starts a comment.
    static TabulatedLaw load(std::istream& in) {
        std::vector<double> u, q;
        std::string line;
        while (std::getline(in, line)) {
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            std::istringstream ls(line);
            double a, b;
            if (ls >> a >> b) {
                u.push_back(a);
                q.push_back(b);
            }
        }
        return TabulatedLaw(std::move(u), std::move(q));
    }

    static TabulatedLaw load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("TabulatedLaw: cannot open " + path);
        return load(in);
    }

    /// Symmetric two-point law on {-v, +v}.
    static TabulatedLaw two_point(double v) {
        return TabulatedLaw({0.0, 0.5, 0.5, 1.0}, {-v, -v, v, v});
    }

    double quantile(double p) const {
        if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("quantile: p outside [0,1]");
        auto it = std::upper_bound(u_.begin(), u_.end(), p);
        std::size_t i = (it == u_.begin()) ? 0 : static_cast<std::size_t>(it - u_.begin()) - 1;
        if (i >= u_.size() - 1) i = u_.size() - 2;
        const double du = u_[i + 1] - u_[i];
        if (du <= 0.0) return q_[i + 1];
        const double w = (p - u_[i]) / du;
        return q_[i] + w * (q_[i + 1] - q_[i]);
    }

    double max_abs() const {
        return std::max(std::fabs(q_.front()), std::fabs(q_.back()));
    }

    /// P(|Q(U)| > y), exact for the interpolated law.
    double prob_abs_above(double y) const {
        return measure_above(y) + measure_below(-y);
    }

    /// E[Q(U)^pow 1_{lo < |Q(U)| <= hi}], pow in {1,2}; exact per segment.
    double abs_band_moment(double lo, double hi, int pow) const {
        if (hi <= lo) return 0.0;
        double total = 0.0;
        for (std::size_t i = 0; i + 1 < u_.size(); ++i) {
            total += segment_band_moment(i, lo, hi, pow);
        }
        return total;
    }

    /// Sample conditionally on |Q(U)| > threshold by inverse transform on the
    /// u-set {u : Q(u) < -threshold} cup {u : Q(u) > threshold}.
    double sample_above(double threshold, RandomStream& rng) const {
        const double m_hi = measure_above(threshold);
        const double m_lo = measure_below(-threshold);
        const double total = m_hi + m_lo;
        if (!(total > 0.0)) throw std::domain_error("TabulatedLaw: empty conditional tail");
        const double v = rng.uniform() * total;
        const double p = v < m_lo ? v : (1.0 - m_hi) + (v - m_lo);
        return quantile(std::min(1.0, std::max(0.0, p)));
    }

    TabulatedLaw scaled(double s) const {
        std::vector<double> q = q_;
        for (auto& v : q) v *= s;
        if (s < 0.0) {
            std::vector<double> u(u_.size()), qq(q.size());
            for (std::size_t i = 0; i < u_.size(); ++i) {
                u[i] = 1.0 - u_[u_.size() - 1 - i];
                qq[i] = q[q.size() - 1 - i];
            }
            return TabulatedLaw(std::move(u), std::move(qq));
        }
        return TabulatedLaw(u_, std::move(q));
    }

private:
    void validate() const {
        if (u_.size() < 2 || u_.size() != q_.size())
            throw std::invalid_argument("TabulatedLaw: need >= 2 matching rows");
        if (u_.front() != 0.0 || u_.back() != 1.0)
            throw std::invalid_argument("TabulatedLaw: u must start at 0 and end at 1");
        for (std::size_t i = 1; i < u_.size(); ++i) {
            if (u_[i] < u_[i - 1]) throw std::invalid_argument("TabulatedLaw: u not ascending");
            if (q_[i] < q_[i - 1]) throw std::invalid_argument("TabulatedLaw: quantile not nondecreasing");
        }
    }

    // Lebesgue measure of {u : Q(u) > y}.
    double measure_above(double y) const {
        if (q_.back() <= y) return 0.0;
        if (q_.front() > y) return 1.0;
        return 1.0 - upper_cross(y);
    }

    // Lebesgue measure of {u : Q(u) < y}.
    double measure_below(double y) const {
        if (q_.front() >= y) return 0.0;
        if (q_.back() < y) return 1.0;
        return lower_cross(y);
    }

    // sup{u : Q(u) <= y} given q_.front() <= y < q_.back()
    double upper_cross(double y) const {
        std::size_t i = 0;
        while (i + 1 < q_.size() && q_[i + 1] <= y) ++i;
        // Q(u_[i]) <= y < Q over (.., u_[i+1]]
        const double dq = q_[i + 1] - q_[i];
        if (dq <= 0.0) return u_[i + 1];
        return u_[i] + (y - q_[i]) / dq * (u_[i + 1] - u_[i]);
    }

    // inf{u : Q(u) >= y} given q_.front() < y <= q_.back()
    double lower_cross(double y) const {
        std::size_t i = q_.size() - 1;
        while (i > 0 && q_[i - 1] >= y) --i;
        const double dq = q_[i] - q_[i - 1];
        if (dq <= 0.0) return u_[i - 1];
        return u_[i - 1] + (y - q_[i - 1]) / dq * (u_[i] - u_[i - 1]);
    }

    double segment_band_moment(std::size_t i, double lo, double hi, int pow) const {
        const double ua = u_[i], ub = u_[i + 1];
        if (ub <= ua) return 0.0;
        const double qa = q_[i], qb = q_[i + 1];
        // collect sub-intervals of [ua, ub] where lo < |Q| <= hi; Q is linear.
        auto q_at = [&](double u) {
            const double w = (u - ua) / (ub - ua);
            return qa + w * (qb - qa);
        };
        auto integrate = [&](double a, double b) {
            if (b <= a) return 0.0;
            const double fa = q_at(a), fb = q_at(b), fm = q_at(0.5 * (a + b));
            if (pow == 1) return (b - a) * 0.5 * (fa + fb);
            return (b - a) / 6.0 * (fa * fa + 4.0 * fm * fm + fb * fb); // exact for quadratics
        };
        // band in Q-space: Q in (lo, hi] or Q in [-hi, -lo); boundary inclusion
        // only matters on plateaus (atoms) and follows the |Q| <= hi convention
        double total = 0.0;
        for (int side = 0; side < 2; ++side) {
            const double blo = side == 0 ? lo : -hi;
            const double bhi = side == 0 ? hi : -lo;
            double a = ua, b = ub;
            if (qb > qa) {
                const double inv = (ub - ua) / (qb - qa);
                a = std::max(ua, ua + (blo - qa) * inv);
                b = std::min(ub, ua + (bhi - qa) * inv);
            } else {
                const bool inside = side == 0 ? (qa > lo && qa <= hi) : (qa >= -hi && qa < -lo);
                if (!inside) continue;
            }
            total += integrate(a, b);
        }
        return total;
    }

    std::vector<double> u_, q_;
};

enum class MeasureKind { SymmetricStable, OneSidedStable, RegularlyVarying, FiniteActivity };

inline const char* to_string(MeasureKind k) {
    switch (k) {
        case MeasureKind::SymmetricStable: return "symmetric-stable";
        case MeasureKind::OneSidedStable: return "one-sided-stable";
        case MeasureKind::RegularlyVarying: return "regularly-varying";
        default: return "finite-activity";
    }
}

/// Analytic description of a one-dimensional Levy measure rho: closed-form
/// tail masses and truncated moments, plus samplers for the jump part.
///
/// Families:
///   SymmetricStable    rho = pushforward of (1/2)|x|^{-1-alpha} dx under x -> sigma x
///   OneSidedStable     rho = pushforward of 1_{(0,inf)} (c/c_alpha) x^{-1-alpha} dx,
///                      c_alpha = -cos(alpha pi/2) Gamma(alpha); requires c/c_alpha > 0
///   RegularlyVarying   unit-rate Pareto(alpha, x0) jump law scaled by sigma
///   FiniteActivity     rate * tabulated jump law
class LevyMeasureModel {
public:
    static LevyMeasureModel symmetric_stable(double alpha, double scale) {
        require(alpha > 0.0 && alpha < 2.0, "symmetric_stable: alpha must be in (0,2)");
        LevyMeasureModel m;
        m.kind_ = MeasureKind::SymmetricStable;
        m.alpha_ = alpha;
        m.scale_ = scale;
        m.density_coeff_ = 0.5; // base density (1/2)|x|^{-1-alpha} on both sides
        return m;
    }

    static LevyMeasureModel one_sided_stable(double alpha, double scale, double intensity_c) {
        require((alpha > 0.0 && alpha < 1.0) || (alpha > 1.0 && alpha < 2.0),
                "one_sided_stable: alpha must be in (0,1) or (1,2)");
        LevyMeasureModel m;
        m.kind_ = MeasureKind::OneSidedStable;
        m.alpha_ = alpha;
        m.scale_ = scale;
        m.intensity_c_ = intensity_c;
        m.density_coeff_ = intensity_c / one_sided_density_norm(alpha);
        require(m.density_coeff_ > 0.0 && std::isfinite(m.density_coeff_),
                "one_sided_stable: c/c_alpha must be positive");
        return m;
    }

    static LevyMeasureModel regularly_varying(double alpha, double scale, double x0) {
        require((alpha > 0.0 && alpha < 1.0) || (alpha > 1.0 && alpha < 2.0),
                "regularly_varying: alpha must be in (0,1) or (1,2)");
        require(x0 > 0.0, "regularly_varying: cutoff x0 must be > 0");
        LevyMeasureModel m;
        m.kind_ = MeasureKind::RegularlyVarying;
        m.alpha_ = alpha;
        m.scale_ = scale;
        m.x0_ = x0;
        return m;
    }

    static LevyMeasureModel finite_activity(double rate, TabulatedLaw law) {
        require(rate >= 0.0, "finite_activity: rate must be >= 0");
        LevyMeasureModel m;
        m.kind_ = MeasureKind::FiniteActivity;
        m.rate_ = rate;
        m.law_ = std::make_shared<TabulatedLaw>(std::move(law));
        return m;
    }

    /// Zero measure (no jumps).
    static LevyMeasureModel none() {
        return finite_activity(0.0, TabulatedLaw({0.0, 1.0}, {0.0, 0.0}));
    }

    MeasureKind kind() const { return kind_; }
    double alpha() const { return alpha_; }
    double scale() const { return scale_; }
    double intensity_c() const { return intensity_c_; }
    double pareto_x0() const { return x0_; }
    double rate() const { return rate_; }
    const TabulatedLaw& law() const { return *law_; }

    /// rho({x : |x| > y}) for y > 0.
    double tail_mass(double y) const {
        require(y > 0.0, "tail_mass: y must be > 0");
        const double s = std::fabs(scale_);
        switch (kind_) {
            case MeasureKind::SymmetricStable:
                if (s == 0.0) return 0.0;
                return std::pow(s, alpha_) * std::pow(y, -alpha_) / alpha_;
            case MeasureKind::OneSidedStable:
                if (s == 0.0) return 0.0;
                return density_coeff_ * std::pow(s, alpha_) * std::pow(y, -alpha_) / alpha_;
            case MeasureKind::RegularlyVarying: {
                if (s == 0.0) return 0.0;
                const double t = x0_ * s / y;
                return t >= 1.0 ? 1.0 : std::pow(t, alpha_);
            }
            case MeasureKind::FiniteActivity:
                return rate_ == 0.0 ? 0.0 : rate_ * law_->prob_abs_above(y);
        }
        return 0.0;
    }

    /// int_{|x|<=kappa} x^2 rho(dx) for kappa > 0.
    double truncated_second_moment(double kappa) const {
        require(kappa > 0.0, "truncated_second_moment: kappa must be > 0");
        const double s = std::fabs(scale_);
        switch (kind_) {
            case MeasureKind::SymmetricStable:
                if (s == 0.0) return 0.0;
                return std::pow(s, alpha_) * std::pow(kappa, 2.0 - alpha_) / (2.0 - alpha_);
            case MeasureKind::OneSidedStable:
                if (s == 0.0) return 0.0;
                return density_coeff_ * std::pow(s, alpha_) * std::pow(kappa, 2.0 - alpha_) / (2.0 - alpha_);
            case MeasureKind::RegularlyVarying: {
                if (s == 0.0) return 0.0;
                const double K = kappa / s;
                if (K <= x0_) return 0.0;
                return s * s * alpha_ * std::pow(x0_, alpha_) *
                       (std::pow(K, 2.0 - alpha_) - std::pow(x0_, 2.0 - alpha_)) / (2.0 - alpha_);
            }
            case MeasureKind::FiniteActivity:
                return rate_ == 0.0 ? 0.0 : rate_ * law_->abs_band_moment(0.0, kappa, 2);
        }
        return 0.0;
    }

    /// int_{1<|x|<=kappa} x rho(dx); 0 for kappa <= 1 (empty annulus).
    double truncated_first_moment(double kappa) const {
        if (kappa <= 1.0) return 0.0;
        return annulus_first_moment(1.0, kappa);
    }

    /// Signed annulus first moment int_{lo<|x|<=hi} x rho(dx), with the
    /// convention that swapping lo > hi negates the integral. Used by the
    /// truncation decomposition, which needs the lo > hi branch when k/c_j < 1.
    double annulus_first_moment(double lo, double hi) const {
        if (lo == hi) return 0.0;
        if (lo > hi) return -annulus_first_moment(hi, lo);
        require(lo >= 0.0, "annulus_first_moment: bounds must be >= 0");
        const double s = std::fabs(scale_);
        switch (kind_) {
            case MeasureKind::SymmetricStable:
                return 0.0;
            case MeasureKind::OneSidedStable: {
                if (s == 0.0) return 0.0;
                if (lo == 0.0 && alpha_ > 1.0)
                    throw std::domain_error("annulus_first_moment: diverges at 0 for alpha > 1");
                // int_{lo/s < u <= hi/s} (sigma u) A u^{-1-alpha} du
                const double p_hi = std::pow(hi / s, 1.0 - alpha_);
                const double p_lo = lo == 0.0 ? 0.0 : std::pow(lo / s, 1.0 - alpha_);
                return scale_ * density_coeff_ * (p_hi - p_lo) / (1.0 - alpha_);
            }
            case MeasureKind::RegularlyVarying: {
                if (s == 0.0) return 0.0;
                const double a = std::max(x0_, lo / s);
                const double b = std::max(x0_, hi / s);
                if (b <= a) return 0.0;
                return scale_ * alpha_ * std::pow(x0_, alpha_) *
                       (std::pow(b, 1.0 - alpha_) - std::pow(a, 1.0 - alpha_)) / (1.0 - alpha_);
            }
            case MeasureKind::FiniteActivity:
                return rate_ == 0.0 ? 0.0 : rate_ * law_->abs_band_moment(lo, hi, 1);
        }
        return 0.0;
    }

    /// Drift (w.r.t. truncation 1_{|x|<=1}) of the family's natural process:
    /// symmetric stable and strictly one-sided stable are pinned by strict
    /// stability; RegularlyVarying/FiniteActivity are the raw compound Poisson
    /// for alpha<1 / finite activity, compensated (mean zero) for alpha>1.
    double canonical_drift() const {
        const double s = std::fabs(scale_);
        switch (kind_) {
            case MeasureKind::SymmetricStable:
                return 0.0;
            case MeasureKind::OneSidedStable:
                if (s == 0.0) return 0.0;
                return density_coeff_ / (1.0 - alpha_) * scale_ * std::pow(s, alpha_ - 1.0);
            case MeasureKind::RegularlyVarying: {
                if (s == 0.0) return 0.0;
                double b = annulus_first_moment(0.0, 1.0);
                if (alpha_ > 1.0) b -= scale_ * alpha_ * x0_ / (alpha_ - 1.0); // subtract full mean
                return b;
            }
            case MeasureKind::FiniteActivity:
                return rate_ == 0.0 ? 0.0 : annulus_first_moment(0.0, 1.0);
        }
        return 0.0;
    }

    /// Total mass rho(R); +inf for the infinite-activity stable families.
    double total_mass() const {
        switch (kind_) {
            case MeasureKind::SymmetricStable:
            case MeasureKind::OneSidedStable:
                return std::fabs(scale_) == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
            case MeasureKind::RegularlyVarying:
                return std::fabs(scale_) == 0.0 ? 0.0 : 1.0;
            case MeasureKind::FiniteActivity:
                return rate_;
        }
        return 0.0;
    }

    bool finite_total_mass() const { return std::isfinite(total_mass()); }

    /// int (x^2 /\ 1) rho(dx), the Levy-measure integrability check.
    double levy_integrability() const {
        return truncated_second_moment(1.0) + tail_mass(1.0);
    }

    /// Asmussen-Rosinski inner cutoff for simulating the compensated part
    /// below kappa: largest eps with trunc_var(eps) <= var_ratio * trunc_var(kappa).
    /// Finite-activity measures sample every jump, so eps = 0.
    double ar_cutoff(double kappa, double var_ratio = 1e-4) const {
        require(kappa > 0.0, "ar_cutoff: kappa must be > 0");
        if (finite_total_mass() || std::fabs(scale_) == 0.0) return 0.0;
        // stable families: trunc_var(eps)/trunc_var(kappa) = (eps/kappa)^{2-alpha}
        return kappa * std::pow(var_ratio, 1.0 / (2.0 - alpha_));
    }

    /// One conditional jump given |x| > threshold.
    double sample_conditional_jump_above(double threshold, RandomStream& rng) const {
        const double s = std::fabs(scale_);
        switch (kind_) {
            case MeasureKind::SymmetricStable: {
                const double mag = threshold * std::pow(rng.uniform(), -1.0 / alpha_);
                return rng.uniform() < 0.5 ? -mag : mag;
            }
            case MeasureKind::OneSidedStable: {
                const double mag = threshold * std::pow(rng.uniform(), -1.0 / alpha_);
                return scale_ < 0.0 ? -mag : mag;
            }
            case MeasureKind::RegularlyVarying: {
                const double lo = std::max(threshold, x0_ * s);
                const double mag = lo * std::pow(rng.uniform(), -1.0 / alpha_);
                return scale_ < 0.0 ? -mag : mag;
            }
            case MeasureKind::FiniteActivity:
                return law_->sample_above(threshold, rng);
        }
        return 0.0;
    }

    /// Jump record of the compound Poisson process of jumps with |x| > threshold
    /// on (0, horizon]; intensity tail_mass(threshold), sizes by inverse transform
    /// on the tail, times sorted strictly ascending. threshold == 0 is allowed
    /// for finite-activity measures and means "every jump".
    std::vector<JumpEvent> sample_jumps_above(double threshold, double horizon, RandomStream& rng) const {
        require(horizon > 0.0, "sample_jumps_above: horizon must be > 0");
        double intensity;
        if (threshold > 0.0) {
            intensity = tail_mass(threshold);
        } else {
            intensity = total_mass();
            require(std::isfinite(intensity), "sample_jumps_above: infinite tail mass");
        }
        std::vector<JumpEvent> events;
        if (intensity <= 0.0) return events;
        const long n = rng.poisson(intensity * horizon);
        if (n == 0) return events;
        events.resize(static_cast<std::size_t>(n));
        for (auto& e : events) e.time = rng.uniform() * horizon;
        std::sort(events.begin(), events.end(),
                  [](const JumpEvent& a, const JumpEvent& b) { return a.time < b.time; });
        for (std::size_t i = 1; i < events.size(); ++i) { // break float ties, keep times strict
            if (events[i].time <= events[i - 1].time)
                events[i].time = std::nextafter(events[i - 1].time, horizon * 2.0);
        }
        for (auto& e : events) {
            e.size = threshold > 0.0 ? sample_conditional_jump_above(threshold, rng)
                                     : sample_unconditional_jump(rng);
        }
        return events;
    }

    /// Exact-in-law increment over dt of the pure-jump process with
    /// characteristics (canonical_drift(), 0, rho). Stable marginals via the
    /// Chambers-Mallows-Stuck transform, finite-activity parts by direct
    /// compound Poisson summation (compensated where the canonical process is).
    double sample_jump_part(double dt, RandomStream& rng) const {
        require(dt > 0.0, "sample_jump_part: dt must be > 0");
        const double s = std::fabs(scale_);
        if (s == 0.0 && kind_ != MeasureKind::FiniteActivity) return 0.0;
        switch (kind_) {
            case MeasureKind::SymmetricStable:
                return s * std::pow(stable_cf_constant(alpha_) * dt, 1.0 / alpha_) *
                       cms_symmetric(alpha_, rng);
            case MeasureKind::OneSidedStable: {
                const double c_cf = density_coeff_ * stable_cf_constant(alpha_);
                return scale_ * std::pow(c_cf * dt, 1.0 / alpha_) * cms_one_sided(alpha_, rng);
            }
            case MeasureKind::RegularlyVarying: {
                const long n = rng.poisson(dt); // unit total mass
                double sum = 0.0;
                for (long i = 0; i < n; ++i)
                    sum += scale_ * x0_ * std::pow(rng.uniform(), -1.0 / alpha_);
                if (alpha_ > 1.0) sum -= dt * scale_ * alpha_ * x0_ / (alpha_ - 1.0);
                return sum;
            }
            case MeasureKind::FiniteActivity: {
                if (rate_ == 0.0) return 0.0;
                const long n = rng.poisson(rate_ * dt);
                double sum = 0.0;
                for (long i = 0; i < n; ++i) sum += law_->quantile(rng.uniform());
                return sum;
            }
        }
        return 0.0;
    }

    /// Standard symmetric alpha-stable variate (CF exp(-|u|^alpha)).
    static double cms_symmetric(double alpha, RandomStream& rng) {
        const double u = kPi * (rng.uniform() - 0.5);
        if (std::fabs(alpha - 1.0) < 1e-12) return std::tan(u);
        const double w = -std::log(rng.uniform());
        return std::sin(alpha * u) / std::pow(std::cos(u), 1.0 / alpha) *
               std::pow(std::cos((1.0 - alpha) * u) / w, (1.0 - alpha) / alpha);
    }

    /// Totally skewed (beta = 1) alpha-stable variate with
    /// CF exp(-|u|^alpha (1 - i tan(pi alpha/2) sgn u)), alpha != 1.
    static double cms_one_sided(double alpha, RandomStream& rng) {
        const double u = kPi * (rng.uniform() - 0.5);
        const double w = -std::log(rng.uniform());
        const double t = std::tan(0.5 * kPi * alpha);
        const double B = std::atan(t) / alpha;
        const double S = std::pow(1.0 + t * t, 0.5 / alpha);
        return S * std::sin(alpha * (u + B)) / std::pow(std::cos(u), 1.0 / alpha) *
               std::pow(std::cos(u - alpha * (u + B)) / w, (1.0 - alpha) / alpha);
    }

private:
    static void require(bool ok, const char* msg) {
        if (!ok) throw std::domain_error(msg);
    }

    double sample_unconditional_jump(RandomStream& rng) const {
        switch (kind_) {
            case MeasureKind::RegularlyVarying:
                return scale_ * x0_ * std::pow(rng.uniform(), -1.0 / alpha_);
            case MeasureKind::FiniteActivity:
                return law_->quantile(rng.uniform());
            default:
                throw std::domain_error("sample_unconditional_jump: infinite activity");
        }
    }

    MeasureKind kind_ = MeasureKind::FiniteActivity;
    double alpha_ = 0.0;
    double scale_ = 0.0;
    double intensity_c_ = 0.0;
    double density_coeff_ = 0.0; // base density coefficient A (one-sided), 1/2 (symmetric)
    double x0_ = 0.0;
    double rate_ = 0.0;
    std::shared_ptr<const TabulatedLaw> law_;
};

/// Characteristics (b, s, rho) w.r.t. the truncation 1_{|x|<=1}.
struct LevyTriplet {
    double drift_b = 0.0;
    double gaussian_s = 0.0;
    LevyMeasureModel measure = LevyMeasureModel::none();

    LevyTriplet() = default;
    LevyTriplet(double b, double s, LevyMeasureModel m)
        : drift_b(b), gaussian_s(s), measure(std::move(m)) {
        if (gaussian_s < 0.0) throw std::domain_error("LevyTriplet: gaussian_s must be >= 0");
        const double chk = measure.levy_integrability();
        if (!std::isfinite(chk)) throw std::domain_error("LevyTriplet: int (x^2 /\\ 1) rho not finite");
    }
};

inline LevyTriplet symmetric_stable_triplet(double alpha, double sigma) {
    return LevyTriplet(0.0, 0.0, LevyMeasureModel::symmetric_stable(alpha, sigma));
}

inline LevyTriplet one_sided_stable_triplet(double alpha, double sigma, double intensity_c) {
    auto m = LevyMeasureModel::one_sided_stable(alpha, sigma, intensity_c);
    return LevyTriplet(m.canonical_drift(), 0.0, std::move(m));
}

inline LevyTriplet regularly_varying_triplet(double alpha, double sigma, double x0) {
    auto m = LevyMeasureModel::regularly_varying(alpha, sigma, x0);
    return LevyTriplet(m.canonical_drift(), 0.0, std::move(m));
}

inline LevyTriplet finite_activity_triplet(double rate, TabulatedLaw law, double gaussian_s = 0.0) {
    auto m = LevyMeasureModel::finite_activity(rate, std::move(law));
    return LevyTriplet(m.canonical_drift(), gaussian_s, std::move(m));
}

/// Sample ell(t+dt) - ell(t) exactly in law: extra drift + Gaussian part +
/// family jump part.
inline double sample_increment(const LevyTriplet& t, double dt, RandomStream& rng) {
    if (!(dt > 0.0)) throw std::domain_error("sample_increment: dt must be > 0");
    double x = (t.drift_b - t.measure.canonical_drift()) * dt;
    if (t.gaussian_s > 0.0) x += std::sqrt(t.gaussian_s * dt) * rng.normal();
    x += t.measure.sample_jump_part(dt, rng);
    return x;
}

} // namespace cylsde::levy1d

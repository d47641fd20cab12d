#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cylsde/csv.hpp"
#include "cylsde/cylnoise.hpp"
#include "cylsde/matrix.hpp"
#include "cylsde/parallel.hpp"
#include "cylsde/stats.hpp"

namespace cylsde::stochint {

using cylnoise::SamplePath;

/// Read-only view of a path up to (and including) a grid time. Predictable
/// integrand values and causal stopping rules receive only this view, which is
/// how predictability is enforced: data beyond the cutoff is unreachable.
class PathPrefix {
public:
    PathPrefix(const SamplePath& path, double cutoff) : path_(&path) {
        max_index_ = -1;
        for (std::size_t i = 0; i < path.grid.size(); ++i)
            if (path.grid[i] <= cutoff) max_index_ = static_cast<int>(i);
        if (max_index_ < 0) throw std::invalid_argument("PathPrefix: cutoff before t_0");
    }

    double cutoff() const { return path_->grid[static_cast<std::size_t>(max_index_)]; }
    int max_index() const { return max_index_; }
    long coords() const { return path_->n; }
    double grid(int i) const {
        check(i);
        return path_->grid[static_cast<std::size_t>(i)];
    }
    /// Cell increment of L^c_k (cells 0 .. max_index-1 are visible).
    double increment(int m, long j) const {
        check(m + 1);
        return path_->increment(m, j);
    }
    /// Running value of coordinate j of L^c_k at grid index i.
    double value(int i, long j) const {
        check(i);
        double acc = 0.0;
        for (int m = 0; m < i; ++m) acc += path_->increment(m, j);
        return acc;
    }
    /// Running value of the full coordinate process (including residual jumps).
    double total_value(int i, long j) const {
        check(i);
        double acc = 0.0;
        for (int m = 0; m < i; ++m) acc += path_->total_increment(m, j);
        return acc;
    }

private:
    void check(int i) const {
        if (i < 0 || i > max_index_)
            throw std::out_of_range("PathPrefix: access beyond the predictable cutoff");
    }
    const SamplePath* path_;
    int max_index_;
};

/// Simple predictable integrand: value Phi_i (a d x n matrix, the operator
/// U_n -> H_d) on each interval (s_i, s_{i+1}]. Values are either fixed
/// matrices or a causal callback evaluated on the prefix up to s_i.
struct SimpleProcess {
    std::vector<double> breakpoints; // 0 = s_0 < ... < s_N = T
    std::vector<Matrix> fixed;       // per interval, when deterministic
    std::function<Matrix(const PathPrefix&, int)> value_fn; // else
    int out_dim = 0;
    int in_dim = 0;

    static SimpleProcess deterministic(std::vector<double> breakpoints, std::vector<Matrix> values) {
        SimpleProcess p;
        p.breakpoints = std::move(breakpoints);
        p.fixed = std::move(values);
        p.validate_breakpoints();
        if (p.fixed.size() + 1 != p.breakpoints.size())
            throw std::invalid_argument("SimpleProcess: need one value per interval");
        p.out_dim = p.fixed.front().rows;
        p.in_dim = p.fixed.front().cols;
        for (const auto& m : p.fixed)
            if (m.rows != p.out_dim || m.cols != p.in_dim)
                throw std::invalid_argument("SimpleProcess: inconsistent value shapes");
        return p;
    }

    static SimpleProcess causal(std::vector<double> breakpoints, int out_dim, int in_dim,
                                std::function<Matrix(const PathPrefix&, int)> fn) {
        SimpleProcess p;
        p.breakpoints = std::move(breakpoints);
        p.validate_breakpoints();
        p.value_fn = std::move(fn);
        p.out_dim = out_dim;
        p.in_dim = in_dim;
        return p;
    }

    bool is_deterministic() const { return !fixed.empty(); }
    int intervals() const { return static_cast<int>(breakpoints.size()) - 1; }

    Matrix value(int i, const SamplePath& path) const {
        if (i < 0 || i >= intervals()) throw std::out_of_range("SimpleProcess: interval index");
        if (is_deterministic()) return fixed[static_cast<std::size_t>(i)];
        PathPrefix prefix(path, breakpoints[static_cast<std::size_t>(i)]);
        Matrix m = value_fn(prefix, i);
        if (m.rows != out_dim || m.cols != in_dim)
            throw std::invalid_argument("SimpleProcess: callback returned wrong shape");
        return m;
    }

    SimpleProcess scaled(double x) const {
        if (!is_deterministic()) throw std::invalid_argument("SimpleProcess::scaled: deterministic only");
        std::vector<Matrix> v;
        v.reserve(fixed.size());
        for (const auto& m : fixed) v.push_back(m.scaled(x));
        return deterministic(breakpoints, std::move(v));
    }

private:
    void validate_breakpoints() const {
        if (breakpoints.size() < 2) throw std::invalid_argument("SimpleProcess: need >= 2 breakpoints");
        if (breakpoints.front() != 0.0)
            throw std::invalid_argument("SimpleProcess: breakpoints must start at 0");
        for (std::size_t i = 1; i < breakpoints.size(); ++i)
            if (breakpoints[i] <= breakpoints[i - 1])
                throw std::invalid_argument("SimpleProcess: breakpoints must ascend");
    }
};

/// The radonified increment <J Phi, f_i> = sum_j dL_j (Phi^* f_i)_j: a plain
/// matrix-vector product in the finite-dimensional truncation.
inline std::vector<double> radonified_increment(const Matrix& phi, const std::vector<double>& dL) {
    return matvec(phi, dL);
}

/// ||Phi Q^{1/2}||_HS^2 accumulated per output row; the row slices are exposed
/// so angle_bracket and operator_bracket can share the same summation order.
inline double hs_row_q(const Matrix& phi, const std::vector<double>& q_diag, int row) {
    double acc = 0.0;
    for (int j = 0; j < phi.cols; ++j) acc += q_diag[static_cast<std::size_t>(j)] * phi(row, j) * phi(row, j);
    return acc;
}

struct IntegralPath {
    std::vector<double> t;        // grid, size M+1
    Matrix values;                // (M+1) x d, row 0 = 0
    std::vector<double> bracket;  // running angle bracket given Q, size M+1

    int dim() const { return values.cols; }
    std::vector<double> value_at(int i) const {
        std::vector<double> v(static_cast<std::size_t>(values.cols));
        for (int d = 0; d < values.cols; ++d) v[static_cast<std::size_t>(d)] = values(i, d);
        return v;
    }

    /// Export: columns t, value_1..value_d, bracket.
    Csv to_csv() const {
        Csv csv;
        csv.header = {"t"};
        for (int d = 1; d <= values.cols; ++d) csv.header.push_back("value_" + std::to_string(d));
        csv.header.push_back("bracket");
        for (int i = 0; i < values.rows; ++i) {
            std::vector<std::string> row{format_double(t[static_cast<std::size_t>(i)])};
            for (int d = 0; d < values.cols; ++d) row.push_back(format_double(values(i, d)));
            row.push_back(format_double(bracket[static_cast<std::size_t>(i)]));
            csv.add_row(std::move(row));
        }
        return csv;
    }
};

enum class NoisePart { Full, MartingaleOnly };

namespace detail {

inline void require_breakpoints_on_grid(const SimpleProcess& psi, const SamplePath& path) {
    std::size_t g = 0;
    for (double s : psi.breakpoints) {
        while (g < path.grid.size() && path.grid[g] < s) ++g;
        if (g >= path.grid.size() || path.grid[g] != s)
            throw std::invalid_argument(
                "integrate_simple: breakpoint not on the path grid; add it to PathSpec::extra_times");
    }
    if (psi.breakpoints.back() != path.T())
        throw std::invalid_argument("integrate_simple: integrand horizon differs from path horizon");
}

} // namespace detail

/// The stochastic integral of a simple process against L^c_k = P^c_k + M^c_k:
/// a telescoping sum of radonified increments over grid cells, exact given the
/// path. The residual part R^c_k never enters here; it is handled by the
/// patched solver.
inline IntegralPath integrate_simple(const SimpleProcess& psi, const SamplePath& path,
                                     const std::vector<double>& q_diag,
                                     NoisePart part = NoisePart::Full) {
    if (psi.in_dim != static_cast<int>(path.n))
        throw std::invalid_argument("integrate_simple: integrand width != path coordinates");
    if (static_cast<long>(q_diag.size()) != path.n)
        throw std::invalid_argument("integrate_simple: q_diag size != path coordinates");
    detail::require_breakpoints_on_grid(psi, path);

    const int M = path.cells();
    IntegralPath out;
    out.t = path.grid;
    out.values = Matrix(M + 1, psi.out_dim);
    out.bracket.assign(static_cast<std::size_t>(M) + 1, 0.0);

    std::vector<double> acc(static_cast<std::size_t>(psi.out_dim), 0.0);
    double br = 0.0;
    int interval = 0;
    Matrix phi = psi.value(0, path);
    double phi_hs = 0.0;
    for (int r = 0; r < psi.out_dim; ++r) phi_hs += hs_row_q(phi, q_diag, r);

    for (int m = 0; m < M; ++m) {
        const double left = path.grid[static_cast<std::size_t>(m)];
        while (interval + 1 < psi.intervals() &&
               left >= psi.breakpoints[static_cast<std::size_t>(interval) + 1]) {
            ++interval;
            phi = psi.value(interval, path);
            phi_hs = 0.0;
            for (int r = 0; r < psi.out_dim; ++r) phi_hs += hs_row_q(phi, q_diag, r);
        }
        const std::vector<double> dL =
            part == NoisePart::Full ? path.increment_row(m) : path.mart_row(m);
        const std::vector<double> contrib = radonified_increment(phi, dL);
        for (int d = 0; d < psi.out_dim; ++d) acc[static_cast<std::size_t>(d)] += contrib[static_cast<std::size_t>(d)];
        br += path.dt(m) * phi_hs;
        for (int d = 0; d < psi.out_dim; ++d) out.values(m + 1, d) = acc[static_cast<std::size_t>(d)];
        out.bracket[static_cast<std::size_t>(m) + 1] = br;
    }
    return out;
}

/// Integral over the window (from, to], starting the accumulator at `initial`
/// (defaults to zero). With initial = I(from) this reproduces I(to) bitwise,
/// which is what the window-additivity property tests exercise.
inline std::vector<double> integrate_window(const SimpleProcess& psi, const SamplePath& path,
                                            double from, double to,
                                            std::optional<std::vector<double>> initial = std::nullopt,
                                            NoisePart part = NoisePart::Full) {
    detail::require_breakpoints_on_grid(psi, path);
    std::vector<double> acc =
        initial ? *initial : std::vector<double>(static_cast<std::size_t>(psi.out_dim), 0.0);
    int interval = 0;
    Matrix phi = psi.value(0, path);
    for (int m = 0; m < path.cells(); ++m) {
        const double left = path.grid[static_cast<std::size_t>(m)];
        const double right = path.grid[static_cast<std::size_t>(m) + 1];
        while (interval + 1 < psi.intervals() &&
               left >= psi.breakpoints[static_cast<std::size_t>(interval) + 1]) {
            ++interval;
            phi = psi.value(interval, path);
        }
        if (left < from || right > to) continue; // cell not inside the window
        const std::vector<double> dL =
            part == NoisePart::Full ? path.increment_row(m) : path.mart_row(m);
        const std::vector<double> contrib = radonified_increment(phi, dL);
        for (int d = 0; d < psi.out_dim; ++d) acc[static_cast<std::size_t>(d)] += contrib[static_cast<std::size_t>(d)];
    }
    return acc;
}

/// <I(Psi), I(Psi)>(t) = sum_i |(s_i, s_{i+1}] cap [0,t]| * ||Phi_i Q^{1/2}||_HS^2.
/// The accumulation order (per-row over intervals, rows summed last) matches
/// operator_bracket's diagonal exactly, so trace(operator_bracket) equals this
/// bitwise.
inline double angle_bracket(const SimpleProcess& psi, const std::vector<double>& q_diag, double t) {
    if (!psi.is_deterministic())
        throw std::invalid_argument("angle_bracket: path-free evaluation needs a deterministic integrand");
    if (t < 0.0 || t > psi.breakpoints.back() * (1.0 + 1e-12))
        throw std::domain_error("angle_bracket: t outside [0, T]");
    std::vector<double> row_acc(static_cast<std::size_t>(psi.out_dim), 0.0);
    for (int i = 0; i < psi.intervals(); ++i) {
        const double lo = psi.breakpoints[static_cast<std::size_t>(i)];
        const double hi = psi.breakpoints[static_cast<std::size_t>(i) + 1];
        const double overlap = std::max(0.0, std::min(hi, t) - lo);
        if (overlap <= 0.0) continue;
        const Matrix& phi = psi.fixed[static_cast<std::size_t>(i)];
        for (int r = 0; r < psi.out_dim; ++r)
            row_acc[static_cast<std::size_t>(r)] += overlap * hs_row_q(phi, q_diag, r);
    }
    double total = 0.0;
    for (double v : row_acc) total += v;
    return total;
}

/// Operator angle bracket int Psi Q Psi^* ds as a d x d matrix.
inline Matrix operator_bracket(const SimpleProcess& psi, const std::vector<double>& q_diag, double t) {
    if (!psi.is_deterministic())
        throw std::invalid_argument("operator_bracket: path-free evaluation needs a deterministic integrand");
    if (t < 0.0 || t > psi.breakpoints.back() * (1.0 + 1e-12))
        throw std::domain_error("operator_bracket: t outside [0, T]");
    Matrix out(psi.out_dim, psi.out_dim);
    for (int i = 0; i < psi.intervals(); ++i) {
        const double lo = psi.breakpoints[static_cast<std::size_t>(i)];
        const double hi = psi.breakpoints[static_cast<std::size_t>(i) + 1];
        const double overlap = std::max(0.0, std::min(hi, t) - lo);
        if (overlap <= 0.0) continue;
        const Matrix& phi = psi.fixed[static_cast<std::size_t>(i)];
        for (int r = 0; r < psi.out_dim; ++r) {
            out(r, r) += overlap * hs_row_q(phi, q_diag, r); // same kernel as angle_bracket
            for (int s = r + 1; s < psi.out_dim; ++s) {
                double acc = 0.0;
                for (int j = 0; j < phi.cols; ++j)
                    acc += q_diag[static_cast<std::size_t>(j)] * phi(r, j) * phi(s, j);
                out(r, s) += overlap * acc;
                out(s, r) = out(r, s);
            }
        }
    }
    return out;
}

/// Linearity of the integral: integrate (X * Psi) over (s, t] versus X times
/// the integral of Psi, on one path, compared componentwise bitwise. X is a
/// scalar functional of the path prefix up to s (so F_s-measurable by
/// construction). Exactness requires X to scale without rounding (0, +-1,
/// powers of two); the callers use sign variables.
inline bool verify_linearity(const SimpleProcess& psi, const SamplePath& path, double s, double t,
                             const std::function<double(const PathPrefix&)>& scalar_at_s) {
    const double X = scalar_at_s(PathPrefix(path, s));
    const auto lhs = integrate_window(psi.scaled(X), path, s, t, std::nullopt);
    auto rhs = integrate_window(psi, path, s, t, std::nullopt);
    for (auto& v : rhs) v *= X;
    for (std::size_t d = 0; d < lhs.size(); ++d)
        if (lhs[d] != rhs[d]) return false;
    return true;
}

/// Causal stopping rule: fires at the first grid time where the predicate on
/// the prefix becomes true. The functional form cannot look ahead, which is
/// the artifact's notion of an admissible stopping time.
struct StoppingRule {
    std::function<bool(const PathPrefix&)> stop_now;

    double evaluate(const SamplePath& path) const {
        for (std::size_t i = 0; i < path.grid.size(); ++i)
            if (stop_now(PathPrefix(path, path.grid[i]))) return path.grid[i];
        return std::numeric_limits<double>::infinity();
    }
};

/// Stopping identity: int_0^{t /\ tau} Psi dL versus
/// int_0^t Psi 1_{s <= tau} dL at every grid t, exact equality required.
inline bool verify_stopping(const SimpleProcess& psi, const SamplePath& path,
                            const std::vector<double>& q_diag, const StoppingRule& rule) {
    const double tau = rule.evaluate(path);
    const IntegralPath plain = integrate_simple(psi, path, q_diag);

    // Psi' = Psi 1_{(s <= tau)}: refine the breakpoints at tau and zero the
    // later intervals. The indicator of a cell (t_m, t_{m+1}] is the
    // F_{t_m}-measurable event {tau > t_m}.
    std::vector<double> bp = psi.breakpoints;
    if (std::isfinite(tau) && tau > 0.0 && tau < path.T()) {
        bp.push_back(tau);
        std::sort(bp.begin(), bp.end());
        bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
    }
    std::vector<Matrix> values;
    values.reserve(bp.size() - 1);
    int src = 0;
    for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
        while (src + 1 < psi.intervals() && bp[i] >= psi.breakpoints[static_cast<std::size_t>(src) + 1]) ++src;
        const bool active = bp[i] < tau; // whole interval (bp[i], bp[i+1]] <= tau
        values.push_back(active ? psi.value(src, path) : Matrix(psi.out_dim, psi.in_dim));
    }
    const SimpleProcess stopped = SimpleProcess::deterministic(bp, std::move(values));
    const IntegralPath indicator = integrate_simple(stopped, path, q_diag);

    for (std::size_t i = 0; i < path.grid.size(); ++i) {
        // index of t_i /\ tau on the grid
        std::size_t clip = i;
        while (clip > 0 && path.grid[clip] > tau) --clip;
        for (int d = 0; d < psi.out_dim; ++d)
            if (plain.values(static_cast<int>(clip), d) != indicator.values(static_cast<int>(i), d))
                return false;
    }
    return true;
}

struct IsometryReport {
    double lhs = 0.0;      // Monte Carlo mean of ||I(Psi)(T)||^2
    double rhs = 0.0;      // int_0^T ||Psi Q^{1/2}||_HS^2 ds
    double std_error = 0.0;
    double z_score = 0.0;
    long n_paths = 0;
};

/// Monte Carlo check of E||I(Psi)(T)||^2 = int ||Psi Q_k^{1/2}||_HS^2 ds for a
/// deterministic integrand against the mean-zero martingale part M^c_k.
inline IsometryReport ito_isometry_test(const SimpleProcess& psi,
                                        const cylnoise::DiagonalCylindricalLevy& L,
                                        const cylnoise::WeightSequence& c,
                                        const cylnoise::TruncationDecomposition& decomp, long n,
                                        long n_paths, cylnoise::PathSpec spec,
                                        std::uint64_t master_seed, int workers = 1) {
    if (!psi.is_deterministic())
        throw std::invalid_argument("ito_isometry_test: deterministic integrand required");
    IsometryReport rep;
    rep.n_paths = n_paths;
    const std::vector<double> q = decomp.q_diag(n);
    for (double s : psi.breakpoints)
        if (s > 0.0 && s < spec.T) spec.extra_times.push_back(s);
    std::vector<double> norms(static_cast<std::size_t>(n_paths), 0.0);
    for_each_index(n_paths, workers, [&](long p) {
        const SamplePath path = cylnoise::sample_path(L, c, decomp.level_k, n, spec, master_seed, p);
        const IntegralPath I = integrate_simple(psi, path, q, NoisePart::MartingaleOnly);
        double nrm = 0.0;
        for (int d = 0; d < psi.out_dim; ++d) {
            const double v = I.values(I.values.rows - 1, d);
            nrm += v * v;
        }
        norms[static_cast<std::size_t>(p)] = nrm;
    });
    const SampleStats st = summarize(norms);
    rep.lhs = st.mean;
    rep.rhs = angle_bracket(psi, q, spec.T);
    rep.std_error = st.std_error;
    rep.z_score = st.std_error > 0.0 ? (rep.lhs - rep.rhs) / st.std_error : 0.0;
    return rep;
}

} // namespace cylsde::stochint

#include <doctest.h>

#include <cmath>
#include <vector>

#include "cylsde/stochint.hpp"

using namespace cylsde;
using namespace cylsde::cylnoise;
using namespace cylsde::stochint;

namespace {

ClosedFormSpec geometric_unit_spec() {
    ClosedFormSpec s;
    s.family = levy1d::MeasureKind::SymmetricStable;
    s.alpha = 1.0;
    s.sigma = DecayRule::geometric(1.0, 0.5);
    return s;
}

struct Setup {
    DiagonalCylindricalLevy L = DiagonalCylindricalLevy::closed_form(geometric_unit_spec());
    WeightSequence c = WeightSequence::from_rule(DecayRule::geometric(1.0, 0.5));
    TruncationDecomposition decomp;
    Setup() { decomp = decompose(L, c, 1.0); }

    SamplePath path(long n, int steps, std::uint64_t seed, long index,
                    std::vector<double> extra = {}) const {
        PathSpec ps;
        ps.T = 1.0;
        ps.steps = steps;
        ps.extra_times = std::move(extra);
        return sample_path(L, c, 1.0, n, ps, seed, index);
    }
};

Matrix mat(int rows, int cols, std::initializer_list<double> vals) {
    Matrix m(rows, cols);
    std::size_t i = 0;
    for (double v : vals) m.a[i++] = v;
    return m;
}

Matrix random_matrix(int rows, int cols, RandomStream& rng) {
    Matrix m(rows, cols);
    for (auto& v : m.a) v = rng.uniform(-2.0, 2.0);
    return m;
}

} // namespace

TEST_CASE("radonified_increment is the matrix-vector product") {
    // identity radonification
    const auto v = radonified_increment(Matrix::identity(3), {1.5, -2.0, 0.25});
    CHECK(v == std::vector<double>{1.5, -2.0, 0.25});
    // zero operator
    const auto z = radonified_increment(Matrix(2, 3), {1.0, 2.0, 3.0});
    CHECK(z == std::vector<double>{0.0, 0.0});
    // n=2, d=1, Phi^* f_1 = (1,2), dL = (3,-1) -> 3 - 2 = 1
    const auto r = radonified_increment(mat(1, 2, {1.0, 2.0}), {3.0, -1.0});
    CHECK(r.size() == 1);
    CHECK(r[0] == 1.0);
    CHECK_THROWS_AS(radonified_increment(mat(1, 2, {1.0, 2.0}), {1.0}), std::invalid_argument);
}

TEST_CASE("integrate_simple: zero, identity, and a hand-computed two-interval case") {
    Setup su;
    const long n = 3;
    const auto q = su.decomp.q_diag(n);
    const auto path = su.path(n, 8, 21, 0, {0.5});

    // zero integrand -> zero path
    const auto zero = SimpleProcess::deterministic({0.0, 1.0}, {Matrix(3, 3)});
    const auto iz = integrate_simple(zero, path, q);
    for (int i = 0; i < iz.values.rows; ++i)
        for (int d = 0; d < 3; ++d) CHECK(iz.values(i, d) == 0.0);

    // identity integrand: the integral is the running sum of increments, bitwise
    const auto ident = SimpleProcess::deterministic({0.0, 1.0}, {Matrix::identity(3)});
    const auto ii = integrate_simple(ident, path, q);
    CHECK(ii.values(0, 0) == 0.0);
    for (long j = 1; j <= n; ++j) {
        double run = 0.0;
        for (int m = 0; m < path.cells(); ++m) {
            run += path.increment(m, j);
            CHECK(ii.values(m + 1, static_cast<int>(j - 1)) == run);
        }
    }

    // two intervals: I(T) = Phi0 * (first-half increment) + Phi1 * (second half)
    RandomStream rng(5);
    const Matrix phi0 = random_matrix(2, 3, rng);
    const Matrix phi1 = random_matrix(2, 3, rng);
    const auto two = SimpleProcess::deterministic({0.0, 0.5, 1.0}, {phi0, phi1});
    const auto it = integrate_simple(two, path, q);
    std::vector<double> h1(static_cast<std::size_t>(n), 0.0), h2(static_cast<std::size_t>(n), 0.0);
    for (int m = 0; m < path.cells(); ++m)
        for (long j = 1; j <= n; ++j) {
            if (path.grid[static_cast<std::size_t>(m) + 1] <= 0.5)
                h1[static_cast<std::size_t>(j - 1)] += path.increment(m, j);
            else
                h2[static_cast<std::size_t>(j - 1)] += path.increment(m, j);
        }
    const auto e1 = radonified_increment(phi0, h1);
    const auto e2 = radonified_increment(phi1, h2);
    for (int d = 0; d < 2; ++d)
        CHECK(it.values(it.values.rows - 1, d) ==
              doctest::Approx(e1[static_cast<std::size_t>(d)] + e2[static_cast<std::size_t>(d)])
                  .epsilon(1e-13));

    // breakpoints must sit on the path grid
    const auto bad = SimpleProcess::deterministic({0.0, 0.123456, 1.0}, {phi0, phi1});
    CHECK_THROWS_AS(integrate_simple(bad, path, q), std::invalid_argument);
}

TEST_CASE("angle_bracket and operator_bracket") {
    // identity on R^2 with Q = diag(q1, q2): bracket(t) = t (q1 + q2)
    const auto ident = SimpleProcess::deterministic({0.0, 1.0}, {Matrix::identity(2)});
    const std::vector<double> q{0.7, 1.9};
    CHECK(angle_bracket(ident, q, 0.5) == doctest::Approx(0.5 * (0.7 + 1.9)).epsilon(1e-15));
    CHECK(angle_bracket(ident, q, 0.0) == 0.0);
    const Matrix ob = operator_bracket(ident, q, 0.5);
    CHECK(ob(0, 0) == doctest::Approx(0.5 * 0.7).epsilon(1e-15));
    CHECK(ob(1, 1) == doctest::Approx(0.5 * 1.9).epsilon(1e-15));
    CHECK(ob(0, 1) == 0.0);

    // zero integrand
    const auto zero = SimpleProcess::deterministic({0.0, 1.0}, {Matrix(2, 2)});
    CHECK(angle_bracket(zero, q, 1.0) == 0.0);

    // Q = identity: bracket equals the time-integrated HS norm
    RandomStream rng(17);
    const Matrix phi = random_matrix(2, 3, rng);
    const auto p = SimpleProcess::deterministic({0.0, 1.0}, {phi});
    double hs2 = 0.0;
    for (double v : phi.a) hs2 += v * v;
    CHECK(angle_bracket(p, {1.0, 1.0, 1.0}, 0.75) == doctest::Approx(0.75 * hs2).epsilon(1e-14));

    // trace identity, exactly, over random integrands (matched accumulation order)
    for (int rep = 0; rep < 100; ++rep) {
        const Matrix a = random_matrix(3, 4, rng);
        const Matrix b = random_matrix(3, 4, rng);
        const Matrix c = random_matrix(3, 4, rng);
        const auto psi = SimpleProcess::deterministic({0.0, 0.3, 0.8, 1.0}, {a, b, c});
        std::vector<double> qq(4);
        for (auto& v : qq) v = rng.uniform(0.0, 3.0);
        const double t = rng.uniform(0.0, 1.0);
        const Matrix m = operator_bracket(psi, qq, t);
        double tr = 0.0;
        for (int d = 0; d < 3; ++d) tr += m(d, d);
        CHECK(tr == angle_bracket(psi, qq, t));
    }
    CHECK_THROWS_AS(angle_bracket(ident, q, 2.0), std::domain_error);
}

TEST_CASE("linearity: scaling by an F_s-measurable sign is exact on 100 paths") {
    Setup su;
    const long n = 2;
    const auto psi = SimpleProcess::deterministic(
        {0.0, 0.5, 1.0},
        {mat(2, 2, {1.25, -0.5, 0.75, 2.0}), mat(2, 2, {0.25, 1.5, -1.0, 0.5})});

    auto sign_of_first_coord = [](const PathPrefix& prefix) {
        return prefix.value(prefix.max_index(), 1) >= 0.0 ? 1.0 : -1.0;
    };
    for (long p = 0; p < 100; ++p) {
        const auto path = su.path(n, 10, 4711, p, {0.5});
        CHECK(verify_linearity(psi, path, 0.5, 1.0, sign_of_first_coord));
        CHECK(verify_linearity(psi, path, 0.5, 1.0, [](const PathPrefix&) { return 0.0; }));
        CHECK(verify_linearity(psi, path, 0.5, 1.0, [](const PathPrefix&) { return 1.0; }));
    }
}

TEST_CASE("stopping: clipped integral equals indicator integral, exactly") {
    Setup su;
    const long n = 2;
    const auto psi = SimpleProcess::deterministic(
        {0.0, 0.5, 1.0},
        {mat(2, 2, {1.0, 0.5, -0.75, 2.0}), mat(2, 2, {0.5, -1.5, 1.0, 0.25})});
    const auto q = su.decomp.q_diag(n);

    // tau = T (rule never fires) and tau = 0 (fires immediately)
    {
        const auto path = su.path(n, 10, 31, 0, {0.5});
        CHECK(verify_stopping(psi, path, q, StoppingRule{[](const PathPrefix&) { return false; }}));
        CHECK(verify_stopping(psi, path, q, StoppingRule{[](const PathPrefix&) { return true; }}));
    }
    // tau = first grid time with |L^c_k e_1| > level, on 100 random paths
    StoppingRule rule{[](const PathPrefix& prefix) {
        return std::fabs(prefix.value(prefix.max_index(), 1)) > 0.35;
    }};
    long fired = 0;
    for (long p = 0; p < 100; ++p) {
        const auto path = su.path(n, 10, 90210, p, {0.5});
        if (std::isfinite(rule.evaluate(path))) ++fired;
        CHECK(verify_stopping(psi, path, q, rule));
    }
    CHECK(fired > 5); // the rule actually fires on a decent fraction of paths
}

TEST_CASE("bilinearity: exact window restart and power-of-two scaling, roundoff additivity") {
    Setup su;
    const long n = 2;
    RandomStream rng(8);
    const Matrix phi0 = random_matrix(2, 2, rng);
    const Matrix phi1 = random_matrix(2, 2, rng);
    const auto psi = SimpleProcess::deterministic({0.0, 0.5, 1.0}, {phi0, phi1});
    const auto q = su.decomp.q_diag(n);

    for (long p = 0; p < 20; ++p) {
        const auto path = su.path(n, 12, 1002, p, {0.5});
        const auto I = integrate_simple(psi, path, q);

        // window additivity, restart form: integrating (u, T] from I(u) lands on I(T) bitwise
        int iu = 0;
        while (path.grid[static_cast<std::size_t>(iu)] != 0.5) ++iu;
        const auto restart = integrate_window(psi, path, 0.5, 1.0, I.value_at(iu));
        for (int d = 0; d < 2; ++d) CHECK(restart[static_cast<std::size_t>(d)] == I.values(I.values.rows - 1, d));

        // scaling by 2 is exact
        const auto doubled = integrate_simple(psi.scaled(2.0), path, q);
        for (int i = 0; i < I.values.rows; ++i)
            for (int d = 0; d < 2; ++d) CHECK(doubled.values(i, d) == 2.0 * I.values(i, d));

        // additivity in the integrand holds to roundoff
        const auto psi2 = SimpleProcess::deterministic({0.0, 0.5, 1.0},
                                                       {random_matrix(2, 2, rng), random_matrix(2, 2, rng)});
        std::vector<Matrix> sum_vals;
        for (int i = 0; i < 2; ++i) sum_vals.push_back(psi.fixed[static_cast<std::size_t>(i)] +
                                                       psi2.fixed[static_cast<std::size_t>(i)]);
        const auto psi_sum = SimpleProcess::deterministic({0.0, 0.5, 1.0}, std::move(sum_vals));
        const auto Ia = integrate_simple(psi2, path, q);
        const auto Is = integrate_simple(psi_sum, path, q);
        for (int d = 0; d < 2; ++d) {
            const double lhs = Is.values(Is.values.rows - 1, d);
            const double rhs = I.values(I.values.rows - 1, d) + Ia.values(Ia.values.rows - 1, d);
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
        }
    }
}

TEST_CASE("predictability: integrand callbacks cannot see beyond the interval start") {
    Setup su;
    const long n = 2;
    const auto q = su.decomp.q_diag(n);
    const auto path = su.path(n, 10, 64, 0, {0.5});

    // a causal value that uses the prefix is fine
    auto causal = SimpleProcess::causal({0.0, 0.5, 1.0}, 1, 2, [](const PathPrefix& prefix, int) {
        Matrix m(1, 2);
        m(0, 0) = prefix.value(prefix.max_index(), 1) > 0 ? 1.0 : -1.0;
        m(0, 1) = 0.5;
        return m;
    });
    CHECK_NOTHROW(integrate_simple(causal, path, q));

    // peeking beyond the cutoff is rejected by the prefix view
    auto peeking = SimpleProcess::causal({0.0, 0.5, 1.0}, 1, 2, [&](const PathPrefix& prefix, int) {
        Matrix m(1, 2);
        m(0, 0) = prefix.value(prefix.max_index() + 3, 1);
        return m;
    });
    CHECK_THROWS_AS(integrate_simple(peeking, path, q), std::out_of_range);
}

TEST_CASE("ito isometry: E ||I(Psi)(T)||^2 matches the bracket within 3 SE") {
    Setup su;
    const long n = 3;
    RandomStream rng(3333);
    const Matrix phi0 = random_matrix(3, 3, rng);
    const Matrix phi1 = random_matrix(3, 3, rng);
    const auto psi = SimpleProcess::deterministic({0.0, 0.5, 1.0}, {phi0, phi1});

    // zero integrand: both sides vanish
    {
        const auto zero = SimpleProcess::deterministic({0.0, 1.0}, {Matrix(3, 3)});
        cylnoise::PathSpec ps;
        ps.T = 1.0;
        ps.steps = 4;
        const auto rep = ito_isometry_test(zero, su.L, su.c, su.decomp, n, 200, ps, 2, 2);
        CHECK(rep.lhs == 0.0);
        CHECK(rep.rhs == 0.0);
    }
    // identity integrand: rhs = T * sum_j Q_jj
    {
        const auto ident = SimpleProcess::deterministic({0.0, 1.0}, {Matrix::identity(3)});
        const auto q = su.decomp.q_diag(n);
        CHECK(angle_bracket(ident, q, 1.0) ==
              doctest::Approx(q[0] + q[1] + q[2]).epsilon(1e-14));
    }
    cylnoise::PathSpec ps;
    ps.T = 1.0;
    ps.steps = 8;
    const auto rep = ito_isometry_test(psi, su.L, su.c, su.decomp, n, 4000, ps, 314159, 2);
    CHECK(std::fabs(rep.z_score) <= 3.0);
}

TEST_CASE("martingale property proxy: bundle averages return to the prefix value") {
    Setup su;
    const long n = 2;
    const auto q = su.decomp.q_diag(n);
    const auto psi = SimpleProcess::deterministic({0.0, 1.0}, {Matrix::identity(2)});

    cylnoise::PathSpec ps;
    ps.T = 1.0;
    ps.steps = 8;
    const auto base = sample_path(su.L, su.c, 1.0, n, ps, 777777, 0);
    const auto I0 = integrate_simple(psi, base, q, NoisePart::MartingaleOnly);

    RandomStream branch_root(31415);
    for (double t : {0.25, 0.5, 0.75}) {
        int it = 0;
        while (base.grid[static_cast<std::size_t>(it)] != t) ++it;
        const long branches = 1500;
        std::vector<std::vector<double>> ends(2, std::vector<double>(static_cast<std::size_t>(branches)));
        for (long b = 0; b < branches; ++b) {
            const auto branched = branch_after(base, su.L, su.c, t,
                                               branch_root.derive(static_cast<std::uint64_t>(b),
                                                                  static_cast<std::uint64_t>(t * 100)));
            const auto Ib = integrate_simple(psi, branched, q, NoisePart::MartingaleOnly);
            for (int d = 0; d < 2; ++d)
                ends[static_cast<std::size_t>(d)][static_cast<std::size_t>(b)] =
                    Ib.values(Ib.values.rows - 1, d);
        }
        for (int d = 0; d < 2; ++d) {
            const auto st = summarize(ends[static_cast<std::size_t>(d)]);
            CHECK(std::fabs(st.mean - I0.values(it, d)) <= 3.0 * st.std_error);
        }
    }
}

TEST_CASE("integral path CSV export carries t, values, and the running bracket") {
    Setup su;
    const long n = 2;
    const auto q = su.decomp.q_diag(n);
    const auto path = su.path(n, 4, 11, 0);
    const auto psi = SimpleProcess::deterministic({0.0, 1.0}, {Matrix::identity(2)});
    const auto I = integrate_simple(psi, path, q);
    const auto csv = I.to_csv();
    CHECK(csv.header == std::vector<std::string>{"t", "value_1", "value_2", "bracket"});
    CHECK(csv.row_count() == static_cast<std::size_t>(path.cells() + 1));
    CHECK(csv.rows.front()[0] == "0");
    CHECK(csv.rows.front()[3] == "0");
}

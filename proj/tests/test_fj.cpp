#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ontolab/fj.hpp"
#include "ontolab/hooft.hpp"
#include "ontolab/ode.hpp"
#include "ontolab/rng.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <numbers>

using namespace ontolab;
using std::numbers::pi;

namespace {

Polynomial var(int n, int i) { return Polynomial::variable(n, i); }

// H = p1 q2 - p2 q1 with the information-loss constraint H - rho = 0,
// rho = a (q1^2 + q2^2), as a multiplier problem on (p1, p2, q1, q2, eta)
FirstOrderLagrangian rotation_infoloss(double a = 1.0) {
    const int n = 4;
    Polynomial h = var(n, 0) * var(n, 3) - var(n, 1) * var(n, 2);
    Polynomial rho = (var(n, 2) * var(n, 2) + var(n, 3) * var(n, 3)) * a;
    auto lagr = FirstOrderLagrangian::canonical(2, Rational(h));
    lagr.add_multiplier(Rational(h - rho), "eta");
    Eigen::VectorXd ref(5);
    ref << 2.3, 0.3, 1.0, 1.0, 0.0; // on the surface H = rho, q2 != 0
    lagr.set_reference_point(ref);
    return lagr;
}

Eigen::MatrixXd random_antisymmetric(int m, SplitMix64& rng) {
    Eigen::MatrixXd r(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) r(i, j) = rng.uniform(-1, 1);
    return 0.5 * (r - r.transpose().eval());
}

} // namespace

TEST_CASE("canonical Lagrangian reproduces the symplectic flow") {
    // rotation Hamiltonian: expected xi' = (p2, -p1, q2, -q1)
    Polynomial h = var(4, 0) * var(4, 3) - var(4, 1) * var(4, 2);
    const auto lagr = FirstOrderLagrangian::canonical(2, Rational(h));

    Eigen::VectorXd x(4);
    x << 0.3, -0.7, 1.2, 0.5;
    const Eigen::VectorXd rhs = lagr.eom_rhs(x);
    CHECK(rhs[0] == doctest::Approx(-0.7));
    CHECK(rhs[1] == doctest::Approx(-0.3));
    CHECK(rhs[2] == doctest::Approx(0.5));
    CHECK(rhs[3] == doctest::Approx(-1.2));

    // same thing through the inverse symplectic matrix
    const Eigen::VectorXd alt =
        symplectic_omega(2).inverse() * lagr.potential_gradient(x);
    CHECK((rhs - alt).norm() < 1e-12);
}

TEST_CASE("zero modes: canonical matrix has none") {
    const auto basis = zero_modes(symplectic_omega(3));
    CHECK(basis.count() == 0);
    CHECK(basis.rank == 6);
}

TEST_CASE("zero modes: odd antisymmetric matrices have exactly one") {
    SplitMix64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::MatrixXd f = random_antisymmetric(3, rng);
        const auto basis = zero_modes(f);
        REQUIRE(basis.count() == 1);
        CHECK((f * basis.modes.col(0)).norm() < 1e-10 * std::max(1.0, f.norm()));
    }
}

TEST_CASE("zero modes: rank-2 4x4 matrix against a brute-force null scan") {
    Eigen::VectorXd u(4), v(4);
    u << 1, 1, 0, 0;
    v << 0, 0, 1, 1; // kernel = span{(1,-1,0,0), (0,0,1,-1)}
    const Eigen::MatrixXd f = u * v.transpose() - v * u.transpose();

    const auto basis = zero_modes(f);
    REQUIRE(basis.count() == 2);
    CHECK(basis.rank == 2);
    for (int j = 0; j < 2; ++j)
        CHECK((f * basis.modes.col(j)).norm() < 1e-10);

    // brute force: grid of candidate vectors, null ones must lie in the span
    const double grid[] = {-1.0, -0.5, 0.0, 0.5, 1.0};
    int found = 0;
    for (double a : grid)
        for (double b : grid)
            for (double c : grid)
                for (double d : grid) {
                    Eigen::VectorXd x(4);
                    x << a, b, c, d;
                    if (x.norm() == 0.0) continue;
                    x.normalize();
                    if ((f * x).norm() > 1e-8) continue;
                    ++found;
                    const Eigen::VectorXd residual =
                        x - basis.modes * (basis.modes.transpose() * x);
                    CHECK(residual.norm() < 1e-8);
                }
    CHECK(found > 0);
}

TEST_CASE("darboux: canonical input returns the identity") {
    const Eigen::MatrixXd t = darboux(symplectic_omega(2));
    CHECK((t - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("darboux: 2x2 closed form") {
    for (double a : {0.5, 2.0, 7.25}) {
        Eigen::MatrixXd f(2, 2);
        f << 0, a, -a, 0;
        const Eigen::MatrixXd t = darboux(f);
        CHECK(std::abs(t(0, 0) - 1.0 / std::sqrt(a)) < 1e-12);
        CHECK(std::abs(t(1, 1) - 1.0 / std::sqrt(a)) < 1e-12);
        CHECK(std::abs(t(0, 1)) < 1e-12);
        CHECK(std::abs(t(1, 0)) < 1e-12);
        CHECK((t.transpose() * f * t - symplectic_omega(1)).cwiseAbs().maxCoeff() <
              1e-12);
    }
}

TEST_CASE("darboux: block-diagonal blocks compose from the 2x2 cases") {
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(4, 4);
    f(0, 1) = 2.0;
    f(1, 0) = -2.0;
    f(2, 3) = 5.0;
    f(3, 2) = -5.0;
    const Eigen::MatrixXd t = darboux(f);
    CHECK((t.transpose() * f * t - symplectic_omega(2)).cwiseAbs().maxCoeff() < 1e-12);
    // every column is a single scaled basis vector, with the 2x2 scalings
    for (int j = 0; j < 4; ++j) {
        int nonzero = 0;
        double value = 0.0;
        for (int i = 0; i < 4; ++i)
            if (std::abs(t(i, j)) > 1e-12) {
                ++nonzero;
                value = std::abs(t(i, j));
            }
        CHECK(nonzero == 1);
        const bool expected = std::abs(value - 1.0 / std::sqrt(2.0)) < 1e-12 ||
                              std::abs(value - 1.0 / std::sqrt(5.0)) < 1e-12;
        CHECK(expected);
    }
}

TEST_CASE("darboux: rejects singular input") {
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(4, 4);
    f(0, 1) = 1.0;
    f(1, 0) = -1.0;
    CHECK_THROWS_WITH_AS(darboux(f), doctest::Contains("zero modes"), NumericalError);
}

TEST_CASE("darboux: 100 random invertible matrices up to dimension 10") {
    SplitMix64 rng(2024);
    int done = 0;
    while (done < 100) {
        const int pairs = 1 + static_cast<int>(rng.next_u64() % 5);
        const int m = 2 * pairs;
        const Eigen::MatrixXd f = random_antisymmetric(m, rng);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(f);
        if (svd.singularValues()(m - 1) < 1e-3) continue; // nearly singular draw
        const Eigen::MatrixXd t = darboux(f);
        CHECK((t.transpose() * f * t - symplectic_omega(pairs)).cwiseAbs().maxCoeff() <
              1e-10);
        ++done;
    }
}

TEST_CASE("eliminate_coordinate: pinning the only momentum leaves a dead pair") {
    Polynomial h = var(2, 0) * var(2, 0) + var(2, 1) * var(2, 1);
    const auto lagr = FirstOrderLagrangian::canonical(1, Rational(h));
    const auto reduced =
        eliminate_coordinate(lagr, 0, Rational::variable(2, 0)); // p1 = 0
    CHECK(reduced.dim() == 1);
    REQUIRE(reduced.kinetic_is_constant());
    CHECK(std::get<Eigen::MatrixXd>(reduced.kinetic()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(reduced.potential().eval(Eigen::VectorXd::Constant(1, 0.7)) ==
          doctest::Approx(0.49));
}

TEST_CASE("eliminate_coordinate: constant solution leaves the restricted matrix") {
    Polynomial h = var(4, 0) * var(4, 0) + var(4, 2) * var(4, 2);
    const auto lagr = FirstOrderLagrangian::canonical(2, Rational(h));
    // p1 = 3: gradient of the solved expression vanishes
    Rational phi = Rational::variable(4, 0) - Rational::constant(4, 3.0);
    const auto reduced = eliminate_coordinate(lagr, 0, phi);
    REQUIRE(reduced.dim() == 3);
    const auto& f = std::get<Eigen::MatrixXd>(reduced.kinetic());
    // restriction of omega to (p2, q1, q2): only the (p2, q2) pair survives
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(3, 3);
    expected(0, 2) = 1.0;
    expected(2, 0) = -1.0;
    CHECK((f - expected).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(reduced.potential().eval(Eigen::Vector3d(0.0, 0.5, 0.0)) ==
          doctest::Approx(9.25));
}

TEST_CASE("eliminate_coordinate: rotation constraint solved for p1") {
    auto lagr = rotation_infoloss();
    // the zero-mode equation of eta: phi = H - rho (z-free constraint)
    const Rational phi = lagr.potential().partial(4).simplified();
    const auto reduced = eliminate_coordinate(lagr, 0, phi);
    REQUIRE(reduced.dim() == 4); // (p2, q1, q2, eta)
    CHECK_FALSE(reduced.kinetic_is_constant());

    // SVD oracle at random chart points: antisymmetric, rank 2 (plus eta row)
    SplitMix64 rng(3);
    for (int s = 0; s < 10; ++s) {
        Eigen::VectorXd x(4);
        x << rng.uniform(-1, 1), rng.uniform(0.5, 2), rng.uniform(0.5, 2), 0.0;
        const Eigen::MatrixXd f = reduced.kinetic_at(x);
        CHECK((f + f.transpose()).cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, f.norm()));
        CHECK(zero_modes(f).rank == 2);
    }

    // the reduced Hamiltonian collapses to rho = q1^2 + q2^2
    Eigen::VectorXd x(4);
    x << 0.4, 1.1, -0.8, 0.0;
    CHECK(reduced.potential().eval(x) == doctest::Approx(1.1 * 1.1 + 0.64).epsilon(1e-12));
}

TEST_CASE("eliminate_coordinate rejects non-affine constraints") {
    Polynomial h = var(2, 0) * var(2, 0) + var(2, 1) * var(2, 1);
    const auto lagr = FirstOrderLagrangian::canonical(1, Rational(h));
    Rational quad(var(2, 0) * var(2, 0) - Polynomial::constant(2, 1.0));
    CHECK_THROWS_WITH_AS(eliminate_coordinate(lagr, 0, quad),
                         doctest::Contains("multiplier"), ValidationError);
}

TEST_CASE("fj_reduce: canonical unconstrained system passes through") {
    Polynomial h = var(4, 0) * var(4, 0) + var(4, 1) * var(4, 1) +
                   var(4, 2) * var(4, 2) + var(4, 3) * var(4, 3);
    const auto lagr = FirstOrderLagrangian::canonical(2, Rational(h));
    const auto red = fj_reduce(lagr);
    CHECK_FALSE(red.stuck);
    CHECK(red.canonical_dim == 4);
    CHECK(red.constraints.empty());
    CHECK(red.elimination_log.empty());
    CHECK(red.system.names() == lagr.names());
}

TEST_CASE("fj_reduce: affine multiplier removes a full pair") {
    // H = (p1^2 + p2^2 + q1^2 + q2^2)/2 with constraint q2 - 2 q1 - 1 = 0
    const int n = 4;
    Polynomial h = (var(n, 0) * var(n, 0) + var(n, 1) * var(n, 1) +
                    var(n, 2) * var(n, 2) + var(n, 3) * var(n, 3)) *
                   0.5;
    Rational phi(var(n, 3) - var(n, 2) * 2.0 - Polynomial::constant(n, 1.0));
    auto lagr = FirstOrderLagrangian::canonical(2, Rational(h));
    lagr.add_multiplier(phi, "eta");

    const auto red = fj_reduce(lagr);
    CHECK_FALSE(red.stuck);
    CHECK(red.canonical_dim == 2); // 2N - 2
    // the affine constraint is the only z-free one; the induced momentum
    // relation appears as a solved zero-mode variable in the log
    CHECK(red.constraints.size() == 1);
    int solved = 0;
    for (const auto& e : red.elimination_log)
        solved += e.kind == EliminationStep::Kind::SolvedVariable;
    CHECK(solved >= 2);
    REQUIRE(red.system.dim() == 2);
    REQUIRE(red.system.kinetic_is_constant());
    CHECK((std::get<Eigen::MatrixXd>(red.system.kinetic()) - symplectic_omega(1))
              .cwiseAbs()
              .maxCoeff() < 1e-12);

    // hand-computed oracle: on the constraint surface q2 = 2 q1 + 1,
    // p2 = 2 p1 the minimum of H is 0.1; the reduced Hamiltonian is an
    // equivalent quadratic and must reach the same minimum.
    const Rational& hr = red.reduced_hamiltonian();
    auto value = [&](double x0, double x1) {
        Eigen::VectorXd x(2);
        x << x0, x1;
        return hr.eval(x);
    };
    const double c = value(0, 0);
    Eigen::VectorXd g(2);
    Eigen::MatrixXd hess(2, 2);
    g << (value(1, 0) - value(-1, 0)) / 2.0, (value(0, 1) - value(0, -1)) / 2.0;
    hess(0, 0) = value(1, 0) + value(-1, 0) - 2 * c;
    hess(1, 1) = value(0, 1) + value(0, -1) - 2 * c;
    hess(0, 1) = hess(1, 0) = value(1, 1) - value(1, 0) - value(0, 1) + c;
    const double h_min = c - 0.5 * g.dot(hess.inverse() * g);
    CHECK(h_min == doctest::Approx(0.1).epsilon(1e-10));

    // the reduced oscillator swings at unit frequency: one period is 2 pi
    Eigen::VectorXd x0(2);
    x0 << 0.3, -0.1;
    OdeRhs rhs = [&](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
        dy = red.system.eom_rhs(y);
    };
    OdeOptions opts;
    const auto sol = integrate_rk45(rhs, 0.0, x0, 2 * pi, opts);
    CHECK((sol.samples.back().y - x0).norm() < 1e-7);
    // and conserves the reduced Hamiltonian
    CHECK(hr.eval(sol.samples.back().y) == doctest::Approx(hr.eval(x0)).epsilon(1e-9));
}

TEST_CASE("fj_reduce: rotation system with information loss keeps one pair") {
    const auto red = fj_reduce(rotation_infoloss());
    CHECK_FALSE(red.stuck);
    CHECK(red.canonical_dim == 2); // N - 1 = 1 emergent pair
    REQUIRE(red.constraints.size() == 1);
    REQUIRE(red.system.dim() == 3); // chart (p2, q1, q2) with one gauge direction

    // H_R = q1^2 + q2^2 in the chart
    Eigen::VectorXd x(3);
    x << 0.5, 0.8, 1.2;
    CHECK(red.reduced_hamiltonian().eval(x) ==
          doctest::Approx(0.64 + 1.44).epsilon(1e-12));

    bool saw_constraint = false, saw_solve = false, saw_gauge = false;
    for (const auto& e : red.elimination_log) {
        saw_constraint |= e.kind == EliminationStep::Kind::MultiplierConstraint;
        saw_solve |= e.kind == EliminationStep::Kind::SolvedVariable;
        saw_gauge |= e.kind == EliminationStep::Kind::GaugeDirection ||
                     e.kind == EliminationStep::Kind::DroppedDecoupled;
    }
    CHECK(saw_constraint);
    CHECK(saw_solve);
    CHECK(saw_gauge);
}

TEST_CASE("fj_reduce: reduced equations agree with the constrained flow") {
    // integrate the original 4D system on the surface H = rho over one period
    // and check that its chart projection solves the reduced equations
    const auto red = fj_reduce(rotation_infoloss());
    REQUIRE_FALSE(red.stuck);

    Polynomial c = Polynomial::monomial(2, {2, 0}, 1.0) + Polynomial::monomial(2, {0, 2}, 1.0);
    THooftSystem sys(rotation_flow(), {ScalarField::from_q_polynomial(c, "C")});
    Eigen::VectorXd q0(2), p0(2);
    q0 << 1.0, 1.0;
    p0 << 2.3, 0.3; // H = 2 = rho

    IntegrateOptions opts;
    for (int k = 0; k <= 200; ++k) opts.checkpoints.push_back(2 * pi * k / 200.0);
    const auto traj = integrate(sys, q0, p0, 2 * pi, opts);

    int tested = 0;
    for (int idx : traj.checkpoint_index) {
        const auto& q = traj.q[idx];
        const auto& p = traj.p[idx];
        if (std::abs(q[1]) < 0.35) continue; // chart boundary
        Eigen::VectorXd chart(3), chart_dot(3);
        chart << p[1], q[0], q[1];
        // original velocities: p2' = -p1, q' = f(q)
        chart_dot << -p[0], q[1], -q[0];
        const Eigen::MatrixXd f = red.system.kinetic_at(chart);
        const Eigen::VectorXd g = red.system.potential_gradient(chart);
        CHECK((f * chart_dot - g).norm() < 1e-6 * std::max(1.0, g.norm()));
        ++tested;
    }
    CHECK(tested > 100);
}

TEST_CASE("fj_reduce is idempotent") {
    // canonical case
    Polynomial h = var(2, 0) * var(2, 0) + var(2, 1) * var(2, 1);
    const auto red1 = fj_reduce(FirstOrderLagrangian::canonical(1, Rational(h)));
    const auto red2 = fj_reduce(red1.system);
    CHECK(red2.canonical_dim == red1.canonical_dim);
    CHECK(red2.elimination_log.empty());
    CHECK(red2.system.names() == red1.system.names());

    // chart-terminal case
    const auto rot1 = fj_reduce(rotation_infoloss());
    const auto rot2 = fj_reduce(rot1.system);
    CHECK(rot2.canonical_dim == rot1.canonical_dim);
    CHECK(rot2.system.names() == rot1.system.names());
    CHECK(rot2.constraints.empty());
    Eigen::VectorXd x(3);
    x << 0.1, 0.9, 1.1;
    CHECK(rot2.reduced_hamiltonian().eval(x) ==
          doctest::Approx(rot1.reduced_hamiltonian().eval(x)).epsilon(1e-12));
}

TEST_CASE("fj_reduce reports stuck outside the supported class") {
    // constraint quadratic in every variable: (p1^2 - 1) + (q1^2 - 1) = 0
    const int n = 2;
    Polynomial h = var(n, 0) * var(n, 0) + var(n, 1) * var(n, 1);
    Rational phi(var(n, 0) * var(n, 0) + var(n, 1) * var(n, 1) -
                 Polynomial::constant(n, 2.0));
    auto lagr = FirstOrderLagrangian::canonical(1, Rational(h));
    lagr.add_multiplier(phi, "eta");
    const auto red = fj_reduce(lagr);
    CHECK(red.stuck);
    REQUIRE_FALSE(red.elimination_log.empty());
    CHECK(red.elimination_log.back().kind == EliminationStep::Kind::Stuck);
}

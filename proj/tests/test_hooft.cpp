#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ontolab/hooft.hpp"
#include "ontolab/rng.hpp"

#include <cmath>
#include <numbers>

using namespace ontolab;
using std::numbers::pi;

namespace {

Eigen::VectorXd vec2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

ScalarField radius_charge() {
    Polynomial c = Polynomial::monomial(2, {2, 0}, 1.0) + Polynomial::monomial(2, {0, 2}, 1.0);
    return ScalarField::from_q_polynomial(c, "C");
}

THooftSystem rotation_system(double omega = 1.0) {
    return THooftSystem(rotation_flow(omega), {radius_charge()});
}

THooftSystem zero_system() {
    // with H = 0 any configuration function is conserved
    Polynomial c = Polynomial::constant(2, 1.0) + Polynomial::monomial(2, {2, 0}, 1.0);
    return THooftSystem(zero_flow(2), {ScalarField::from_q_polynomial(c, "C")});
}

} // namespace

TEST_CASE("zero flow gives a constant trajectory and unit monodromy") {
    const auto sys = zero_system();
    const auto traj = integrate(sys, vec2(0.4, -1.1), vec2(0.2, 0.7), 5.0);
    CHECK((traj.q.back() - traj.q.front()).norm() < 1e-12);
    CHECK((traj.p.back() - traj.p.front()).norm() < 1e-12);
    CHECK((traj.monodromy - Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-12);
}

TEST_CASE("rotation flow: closed form state and monodromy at quarter period") {
    const auto sys = rotation_system();
    const auto traj = integrate(sys, vec2(1.0, 0.0), vec2(0.0, -1.0), pi / 2);
    CHECK(std::abs(traj.q.back()[0]) < 1e-9);
    CHECK(traj.q.back()[1] == doctest::Approx(-1.0).epsilon(1e-9));

    Eigen::MatrixXd rot(2, 2); // rotation by -pi/2
    rot << 0, 1, -1, 0;
    CHECK((traj.monodromy - rot).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("linear flow in one dimension: growth of q, decay of p") {
    Eigen::MatrixXd a(1, 1);
    a << 1.0;
    Polynomial c = Polynomial::constant(1, 1.0); // constant charge
    THooftSystem sys(linear_flow(a), {ScalarField::from_q_polynomial(c, "C")});
    Eigen::VectorXd q0(1), p0(1);
    q0 << 1.0;
    p0 << 0.5;
    const auto traj = integrate(sys, q0, p0, 1.0);
    CHECK(traj.q.back()[0] == doctest::Approx(std::exp(1.0)).epsilon(1e-9));
    CHECK(traj.p.back()[0] == doctest::Approx(0.5 * std::exp(-1.0)).epsilon(1e-9));
    CHECK(traj.monodromy(0, 0) == doctest::Approx(std::exp(1.0)).epsilon(1e-9));
}

TEST_CASE("energy is conserved along trajectories") {
    const auto sys = rotation_system(1.7);
    const auto h = sys.hamiltonian();
    const auto traj = integrate(sys, vec2(0.8, -0.3), vec2(0.4, 1.2), 15.0);
    const double e0 = h(traj.q.front(), traj.p.front());
    for (size_t k = 0; k < traj.times.size(); ++k)
        CHECK(std::abs(h(traj.q[k], traj.p[k]) - e0) < 1e-9 * std::max(1.0, std::abs(e0)));
}

TEST_CASE("registered charges stay constant along trajectories") {
    const auto sys = rotation_system();
    const auto traj = integrate(sys, vec2(1.2, 0.1), vec2(-0.4, 0.9), 12.0);
    const auto& c = sys.charges.front();
    const double c0 = c(traj.q.front(), traj.p.front());
    for (size_t k = 0; k < traj.times.size(); ++k)
        CHECK(std::abs(c(traj.q[k], traj.p[k]) - c0) < 1e-9 * std::max(1.0, std::abs(c0)));
}

TEST_CASE("trajectory satisfies the flow equation at collocation points") {
    const auto sys = rotation_system();
    IntegrateOptions opts;
    for (int k = 0; k <= 400; ++k) opts.checkpoints.push_back(0.005 * k);
    const auto traj = integrate(sys, vec2(1.0, 0.0), vec2(0.0, -1.0), 2.0, opts);

    // five-point stencil on the checkpoint grid vs the stored derivative
    const auto& cp = traj.checkpoint_index;
    const double h = 0.005;
    for (size_t j = 2; j + 2 < cp.size(); ++j) {
        const Eigen::VectorXd fd = (-traj.q[cp[j + 2]] + 8 * traj.q[cp[j + 1]] -
                                    8 * traj.q[cp[j - 1]] + traj.q[cp[j - 2]]) /
                                   (12 * h);
        CHECK((fd - traj.qdot[cp[j]]).norm() < 1e-8);
    }
}

TEST_CASE("monodromy agrees with finite-difference restarts") {
    const auto sys = rotation_system(0.9);
    const Eigen::VectorXd q0 = vec2(0.6, -0.2), p0 = vec2(0.1, 0.4);
    const double t = 1.3;
    const auto traj = integrate(sys, q0, p0, t);

    const double eps = 1e-6;
    for (int j = 0; j < 2; ++j) {
        Eigen::VectorXd qp = q0, qm = q0;
        qp[j] += eps;
        qm[j] -= eps;
        const auto tp = integrate(sys, qp, p0, t);
        const auto tm = integrate(sys, qm, p0, t);
        const Eigen::VectorXd col = (tp.q.back() - tm.q.back()) / (2 * eps);
        CHECK((col - traj.monodromy.col(j)).norm() < 1e-6);
    }
}

TEST_CASE("step underflow raises a diagnostic") {
    // blow-up flow: f = q^2 reaches infinity in finite time
    Polynomial comp = Polynomial::monomial(1, {2}, 1.0);
    THooftSystem sys(polynomial_flow({comp}), {});
    Eigen::VectorXd q0(1), p0(1);
    q0 << 1.0;
    p0 << 0.0;
    CHECK_THROWS_AS(integrate(sys, q0, p0, 5.0), NumericalError);
}

TEST_CASE("poisson bracket of a canonical pair is one") {
    ScalarField f = ScalarField::from_phase_rational(2, Rational::variable(4, 2), "q1");
    ScalarField g = ScalarField::from_phase_rational(2, Rational::variable(4, 0), "p1");
    const auto br = poisson_bracket(f, g, vec2(0.3, 0.8), vec2(-0.2, 0.5));
    CHECK(br.value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(br.est_truncation == 0.0); // exact gradients available

    const auto fd = poisson_bracket(f, g, vec2(0.3, 0.8), vec2(-0.2, 0.5), 1e-5,
                                    BracketMode::FiniteDifference);
    CHECK(fd.value == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("poisson bracket of charge and Hamiltonian vanishes") {
    const auto sys = rotation_system();
    const auto h = sys.hamiltonian();
    const auto& c = sys.charges.front();
    SplitMix64 rng(17);
    for (int s = 0; s < 25; ++s) {
        const auto q = vec2(rng.uniform(-2, 2), rng.uniform(-2, 2));
        const auto p = vec2(rng.uniform(-2, 2), rng.uniform(-2, 2));
        CHECK(std::abs(poisson_bracket(c, h, q, p).value) < 1e-12);
        CHECK(std::abs(poisson_bracket(c, h, q, p, 1e-5,
                                       BracketMode::FiniteDifference).value) < 1e-8);
        // antisymmetry: {H, H} = 0
        CHECK(std::abs(poisson_bracket(h, h, q, p).value) < 1e-12);
    }
    CHECK(sys.verify_charges().ok);
}

TEST_CASE("split: identities at the reference point and at random points") {
    const auto sys = rotation_system();
    const auto sp = split(sys, Eigen::VectorXd::Ones(1));

    // q = (1,0), p = (0,-1): H = 1, rho = 1, so H- = 0 and H+ = 1
    const auto q = vec2(1.0, 0.0), p = vec2(0.0, -1.0);
    CHECK(sp.hamiltonian(q, p) == doctest::Approx(1.0));
    CHECK(sp.rho(q, p) == doctest::Approx(1.0));
    CHECK(sp.h_minus(q, p) == doctest::Approx(0.0).scale(1));
    CHECK(sp.h_plus(q, p) == doctest::Approx(1.0));

    SplitMix64 rng(23);
    for (int s = 0; s < 100; ++s) {
        const auto qq = vec2(rng.uniform(-2, 2), rng.uniform(-2, 2));
        const auto pp = vec2(rng.uniform(-2, 2), rng.uniform(-2, 2));
        if (sp.rho(qq, pp) < 0.1) continue;
        const double h = sp.hamiltonian(qq, pp);
        CHECK(std::abs(sp.h_plus(qq, pp) - sp.h_minus(qq, pp) - h) <
              1e-12 * std::max(1.0, std::abs(h)));
        CHECK(sp.h_plus(qq, pp) >= -1e-14);
        CHECK(sp.h_minus(qq, pp) >= -1e-14);
    }

    // the information-loss surface root: H - rho as a polynomial
    REQUIRE(sp.information_loss_root.has_value());
    Eigen::VectorXd x(4); // (p1, p2, q1, q2)
    x << 0.0, -1.0, 1.0, 0.0;
    CHECK(sp.information_loss_root->eval(x) == doctest::Approx(0.0).scale(1));
}

TEST_CASE("split rejects a charge combination that can turn negative") {
    Polynomial c = Polynomial::variable(2, 0); // C = q1, changes sign on the box
    THooftSystem sys(rotation_flow(), {ScalarField::from_q_polynomial(c, "C")});
    CHECK_THROWS_AS(split(sys, Eigen::VectorXd::Ones(1)), std::domain_error);
}

TEST_CASE("orbit spectrum of the unit rotation orbit") {
    const auto sys = rotation_system();
    const auto sp = split(sys, Eigen::VectorXd::Ones(1));
    const auto traj = integrate(sys, vec2(1.0, 0.0), vec2(0.0, -1.0), 3 * pi);
    const auto orb = orbit_spectrum(sys, traj, sp, 10);

    CHECK(orb.period == doctest::Approx(2 * pi).epsilon(1e-10));
    REQUIRE(orb.levels.size() == 11);
    for (int n = 0; n <= 10; ++n)
        CHECK(orb.levels[n] == doctest::Approx(static_cast<double>(n)).epsilon(1e-9));
    // consecutive spacing is exactly 2 pi / T
    for (int n = 1; n <= 10; ++n)
        CHECK(orb.levels[n] - orb.levels[n - 1] ==
              doctest::Approx(2 * pi / orb.period).epsilon(1e-12));
    CHECK(orb.rho_value == doctest::Approx(1.0));
    CHECK(orb.quantization_consistent);
}

TEST_CASE("orbit spectrum of the omega = 3 rotation") {
    const auto sys = rotation_system(3.0);
    const auto sp = split(sys, Eigen::VectorXd::Ones(1) * 3.0); // rho = 3 C, matches H scale
    const auto traj = integrate(sys, vec2(1.0, 0.0), vec2(0.0, -3.0), 2.5 * pi);
    const auto orb = orbit_spectrum(sys, traj, sp, 5);
    CHECK(orb.period == doctest::Approx(2 * pi / 3).epsilon(1e-10));
    for (int n = 0; n <= 5; ++n)
        CHECK(orb.levels[n] == doctest::Approx(3.0 * n).epsilon(1e-9));
}

TEST_CASE("zero flow is aperiodic") {
    const auto sys = zero_system();
    const auto sp = split(sys, Eigen::VectorXd::Ones(1));
    const auto traj = integrate(sys, vec2(0.5, 0.5), vec2(0.1, 0.1), 5.0);
    CHECK_THROWS_AS(orbit_spectrum(sys, traj, sp, 3), NumericalError);
}

TEST_CASE("off-resonance orbit is flagged inconsistent") {
    const auto sys = rotation_system();
    const auto sp = split(sys, Eigen::VectorXd::Ones(1));
    const auto traj = integrate(sys, vec2(1.1, 0.0), vec2(0.0, -1.21), 3 * pi);
    const auto orb = orbit_spectrum(sys, traj, sp, 3);
    CHECK(orb.period == doctest::Approx(2 * pi).epsilon(1e-10));
    CHECK_FALSE(orb.quantization_consistent);
    CHECK(orb.rho_value == doctest::Approx(1.21));
}

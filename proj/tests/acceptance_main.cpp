// Acceptance suite: every release-gating property of the laboratory, one
// criterion per function, executed at fixed tolerances with a PASS/FAIL line
// each. Exit code 0 only when every criterion holds.

#include "ontolab/automaton.hpp"
#include "ontolab/fj.hpp"
#include "ontolab/hooft.hpp"
#include "ontolab/koopman.hpp"
#include "ontolab/path_integral.hpp"
#include "ontolab/rng.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <vector>

using namespace ontolab;
using std::numbers::pi;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Eigen::VectorXd vec2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

ScalarField radius_charge() {
    Polynomial c =
        Polynomial::monomial(2, {2, 0}, 1.0) + Polynomial::monomial(2, {0, 2}, 1.0);
    return ScalarField::from_q_polynomial(c, "C");
}

THooftSystem rotation_system(double omega = 1.0) {
    return THooftSystem(rotation_flow(omega), {radius_charge()});
}

// ---------------------------------------------------------------------- 1
Outcome criterion_three_state_clock() {
    const auto t0 = std::chrono::steady_clock::now();
    const DeterministicAutomaton clock(3, {1, 2, 0});
    const auto spec = spectrum(transition_matrix(clock));
    const double elapsed = seconds_since(t0);

    const std::vector<double> expected{-2 * pi / 3, 0.0, 2 * pi / 3};
    double worst = 0.0;
    for (int k = 0; k < 3; ++k)
        worst = std::max(worst, std::abs(spec.eigenphases[k] - expected[k]));

    std::ostringstream out;
    out << "max phase error " << worst << " (tol 1e-12), runtime " << elapsed << " s";
    return {worst < 1e-12 && elapsed < 1.0, out.str()};
}

// ---------------------------------------------------------------------- 2
Outcome criterion_four_state_universe() {
    const DeterministicAutomaton universe(4, {1, 2, 0, 1});
    const auto partition = equivalence_classes(universe);
    const bool classes_ok = partition.classes ==
                            std::vector<std::vector<int>>{{0, 3}, {1}, {2}};

    const auto q = quotient(universe, partition);
    // isomorphic to the three-state cycle: a permutation with one 3-cycle
    bool cycle_ok = q.n_states == 3 && q.injective();
    if (cycle_ok) {
        int s = 0, steps = 0;
        do {
            s = q.next[s];
            ++steps;
        } while (s != 0 && steps <= 3);
        cycle_ok = steps == 3;
    }

    const auto uq = transition_matrix(q);
    Eigen::MatrixXcd gram = uq.entries.adjoint() * uq.entries;
    gram -= Eigen::MatrixXcd::Identity(3, 3);
    const double unitarity = gram.cwiseAbs().maxCoeff();

    std::ostringstream out;
    out << "classes {{1,4},{2},{3}} " << (classes_ok ? "found" : "WRONG")
        << ", quotient 3-cycle " << (cycle_ok ? "yes" : "no") << ", |U+U - I| = "
        << unitarity << " (tol 1e-12)";
    return {classes_ok && cycle_ok && unitarity < 1e-12, out.str()};
}

// ---------------------------------------------------------------------- 3
Outcome criterion_splitting_identities() {
    struct Registered {
        std::string name;
        THooftSystem sys;
        Eigen::VectorXd a;
    };
    Polynomial positive_charge =
        Polynomial::constant(2, 1.0) + Polynomial::monomial(2, {2, 0}, 1.0) +
        Polynomial::monomial(2, {0, 2}, 1.0);
    Eigen::MatrixXd growth(1, 1);
    growth << 1.0;

    std::vector<Registered> registered;
    registered.push_back({"rotation", rotation_system(1.0), Eigen::VectorXd::Ones(1)});
    registered.push_back(
        {"rotation3", rotation_system(3.0), Eigen::VectorXd::Ones(1) * 3.0});
    registered.push_back(
        {"zero", THooftSystem(zero_flow(2),
                              {ScalarField::from_q_polynomial(positive_charge, "C")}),
         Eigen::VectorXd::Ones(1)});
    registered.push_back(
        {"growth", THooftSystem(linear_flow(growth),
                                {ScalarField::from_q_polynomial(
                                    Polynomial::constant(1, 1.0), "C")}),
         Eigen::VectorXd::Ones(1) * 2.0});

    double worst_identity = 0.0, worst_bracket = 0.0;
    for (const auto& reg : registered) {
        if (!reg.sys.verify_charges().ok)
            return {false, reg.name + ": charges fail to commute with H"};
        const auto sp = split(reg.sys, reg.a);
        SplitMix64 rng(0xACCE);
        const int n = reg.sys.dim();
        int accepted = 0;
        while (accepted < 100) {
            Eigen::VectorXd q(n), p(n);
            for (int i = 0; i < n; ++i) {
                q[i] = rng.uniform(-1.2, 1.2);
                p[i] = rng.uniform(-1.2, 1.2);
            }
            if (sp.rho(q, p) <= 0.0) return {false, reg.name + ": rho <= 0 sampled"};
            if (sp.rho(q, p) < 0.4) continue; // generic positive-rho points
            ++accepted;
            const double h = sp.hamiltonian(q, p);
            worst_identity = std::max(
                worst_identity, std::abs(sp.h_plus(q, p) - sp.h_minus(q, p) - h));
            const auto br = poisson_bracket(sp.h_plus, sp.h_minus, q, p, 1e-5,
                                            BracketMode::FiniteDifference);
            worst_bracket = std::max(worst_bracket, std::abs(br.value));
        }
    }
    std::ostringstream out;
    out << "4 systems x 100 points: |H+ - H- - H| <= " << worst_identity
        << " (tol 1e-12), fd |{H+,H-}| <= " << worst_bracket << " (tol 1e-8)";
    return {worst_identity < 1e-12 && worst_bracket < 1e-8, out.str()};
}

// ---------------------------------------------------------------------- 4
Outcome criterion_orbit_quantization() {
    double worst_period = 0.0, worst_level = 0.0;
    for (double omega : {1.0, 3.0}) {
        const auto sys = rotation_system(omega);
        const auto sp = split(sys, Eigen::VectorXd::Ones(1) * omega);
        const auto traj =
            integrate(sys, vec2(1.0, 0.0), vec2(0.0, -omega), 3 * pi / omega);
        const auto orbit = orbit_spectrum(sys, traj, sp, 10);
        worst_period = std::max(worst_period,
                                std::abs(orbit.period - 2 * pi / omega));
        for (int n = 0; n <= 10; ++n) {
            const double expected = omega * n;
            const double err = n == 0 ? std::abs(orbit.levels[0])
                                      : std::abs(orbit.levels[n] / expected - 1.0);
            worst_level = std::max(worst_level, err);
        }
        if (!orbit.quantization_consistent)
            return {false, "rho*T is not an integer multiple of 2 pi on the unit orbit"};
    }
    std::ostringstream out;
    out << "period error " << worst_period << " (tol 1e-6), relative level error "
        << worst_level << " (tol 1e-9)";
    return {worst_period < 1e-6 && worst_level < 1e-9, out.str()};
}

// ---------------------------------------------------------------------- 5
Outcome criterion_path_concentration() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto sys = rotation_system();
    PathSamplingConfig cfg;
    cfg.t_end = pi / 2;
    cfg.n_slices = 64;
    cfg.n_samples = 10000;
    cfg.seed = 20260808;
    cfg.n_threads = 2;
    const std::vector<double> ladder{0.1, 0.05623413251903491, 0.03162277660168379,
                                     0.01778279410038923, 0.01};
    const auto rep = concentration_scan(sys, vec2(1.0, 0.0), vec2(0.0, -1.0), cfg, ladder);
    const double elapsed = seconds_since(t0);

    bool monotone = true;
    for (size_t i = 1; i < rep.mean_sq_deviation.size(); ++i)
        monotone = monotone && rep.mean_sq_deviation[i] < rep.mean_sq_deviation[i - 1];

    std::ostringstream out;
    out << "fitted exponent " << rep.fitted_exponent
        << " (2.0 +- 0.2), monotone " << (monotone ? "yes" : "no") << ", runtime "
        << elapsed << " s (limit 60)";
    return {std::abs(rep.fitted_exponent - 2.0) <= 0.2 && monotone && elapsed < 60.0,
            out.str()};
}

// ---------------------------------------------------------------------- 6
Outcome criterion_determinant_identity() {
    double worst_route = 0.0, worst_ghost = 0.0;

    {
        const auto sys = rotation_system();
        const auto traj = integrate(sys, vec2(1.0, 0.0), vec2(0, 0), 2.0);
        const auto det = fluctuation_determinant(sys, traj, 256);
        worst_route = std::max(
            worst_route, std::abs(det.log_delta_route - det.log_monodromy_route));
        worst_ghost =
            std::max(worst_ghost, ghost_cancellation_check(sys, traj, 256).residual);
    }
    {
        Eigen::MatrixXd a(1, 1);
        a << 1.0;
        THooftSystem sys(linear_flow(a), {});
        Eigen::VectorXd q0(1);
        q0 << 1.0;
        const auto traj = integrate(sys, q0, Eigen::VectorXd::Zero(1), 1.0);
        const auto det = fluctuation_determinant(sys, traj, 256);
        worst_route = std::max(
            worst_route, std::abs(det.log_delta_route - det.log_monodromy_route));
        const auto ghost = ghost_cancellation_check(sys, traj, 256);
        worst_ghost = std::max(worst_ghost, ghost.residual);
        // both factors must individually sit at e^t
        if (std::abs(ghost.log_jacobian - 1.0) > 1e-6 ||
            std::abs(ghost.log_monodromy_det - 1.0) > 1e-6)
            return {false, "exponential-flow factors depart from e^t"};
    }
    std::ostringstream out;
    out << "route disagreement <= " << worst_route
        << " (tol 1e-6), ghost residual <= " << worst_ghost << " (tol 1e-8)";
    return {worst_route < 1e-6 && worst_ghost < 1e-8, out.str()};
}

// ---------------------------------------------------------------------- 7
struct Chart {
    ReducedSystem red;
    Rational reconstruct; // the eliminated momentum in chart coordinates
    int eliminated;       // 0 = p1 (chart valid for q2 != 0), 1 = p2 (q1 != 0)
};

Chart build_chart(int eliminated) {
    const int n = 4;
    auto v = [&](int i) { return Polynomial::variable(n, i); };
    Polynomial h = v(0) * v(3) - v(1) * v(2);
    Polynomial rho = v(2) * v(2) + v(3) * v(3);
    auto lagr = FirstOrderLagrangian::canonical(2, Rational(h));
    lagr.add_multiplier(Rational(h - rho), "eta");
    Eigen::VectorXd ref(5);
    ref << 2.3, 0.3, 1.0, 1.0, 0.0;
    lagr.set_reference_point(ref);

    FjOptions opts;
    opts.first_target = eliminated;
    Chart chart{fj_reduce(lagr, opts), Rational(), eliminated};
    if (chart.red.stuck || chart.red.canonical_dim != 2 || chart.red.system.dim() != 3)
        throw NumericalError("chart reduction failed");
    for (const auto& e : chart.red.elimination_log)
        if (e.kind == EliminationStep::Kind::SolvedVariable && e.solved_expression)
            chart.reconstruct = *e.solved_expression;
    return chart;
}

// chart state (pX, q1, q2) -> full (p1, p2, q1, q2)
Eigen::VectorXd chart_to_full(const Chart& chart, const Eigen::VectorXd& x) {
    Eigen::VectorXd padded = Eigen::VectorXd::Zero(chart.reconstruct.nvars());
    padded.head(3) = x;
    const double missing = chart.reconstruct.eval(padded);
    Eigen::VectorXd full(4);
    if (chart.eliminated == 0)
        full << missing, x[0], x[1], x[2];
    else
        full << x[0], missing, x[1], x[2];
    return full;
}

Eigen::VectorXd full_to_chart(const Chart& chart, const Eigen::VectorXd& full) {
    Eigen::VectorXd x(3);
    if (chart.eliminated == 0)
        x << full[1], full[2], full[3];
    else
        x << full[0], full[2], full[3];
    return x;
}

Outcome criterion_fj_reduction() {
    const Chart chart_a = build_chart(0); // q2 != 0
    const Chart chart_b = build_chart(1); // q1 != 0

    // gauge-invariant observables on the constraint surface: rho and the
    // drift w = p.q + 2 rho beta with the angle beta unwrapped along the path
    auto observables = [](const Eigen::VectorXd& full, double& beta_prev,
                          bool first) -> std::pair<double, double> {
        const double rho = full[2] * full[2] + full[3] * full[3];
        const double s = full[0] * full[2] + full[1] * full[3];
        double beta = std::atan2(full[3], full[2]);
        if (!first) {
            while (beta - beta_prev > pi) beta -= 2 * pi;
            while (beta - beta_prev < -pi) beta += 2 * pi;
        }
        beta_prev = beta;
        return {rho, s + 2 * rho * beta};
    };

    // reference: the constrained original flow over one period
    const auto sys = rotation_system();
    const Eigen::VectorXd q0 = vec2(1.0, 1.0), p0 = vec2(2.3, 0.3); // H = rho = 2
    const int n_compare = 628;
    IntegrateOptions opts;
    for (int k = 1; k <= n_compare; ++k)
        opts.checkpoints.push_back(2 * pi * k / n_compare);
    const auto traj = integrate(sys, q0, p0, 2 * pi, opts);

    std::vector<double> rho_ref, w_ref, t_ref;
    {
        double beta_prev = 0.0;
        bool first = true;
        Eigen::VectorXd full(4);
        full << p0[0], p0[1], q0[0], q0[1];
        auto [r, w] = observables(full, beta_prev, first);
        rho_ref.push_back(r);
        w_ref.push_back(w);
        t_ref.push_back(0.0);
        first = false;
        for (int idx : traj.checkpoint_index) {
            full << traj.p[idx][0], traj.p[idx][1], traj.q[idx][0], traj.q[idx][1];
            auto [rr, ww] = observables(full, beta_prev, false);
            rho_ref.push_back(rr);
            w_ref.push_back(ww);
            t_ref.push_back(traj.times[idx]);
        }
    }

    // oracle for the reference itself: w(t) = w(0) - 2 rho t
    double worst_drift = 0.0;
    for (size_t k = 0; k < t_ref.size(); ++k)
        worst_drift = std::max(
            worst_drift, std::abs(w_ref[k] - (w_ref[0] - 2.0 * rho_ref[0] * t_ref[k])));
    if (worst_drift > 1e-7)
        return {false, "constrained original flow violates the drift law"};

    // reduced system: integrate the chart equations (minimum-norm gauge),
    // hopping charts when the current one approaches its boundary
    const Chart* chart = &chart_a;
    Eigen::VectorXd full(4);
    full << p0[0], p0[1], q0[0], q0[1];
    Eigen::VectorXd x = full_to_chart(*chart, full);

    const int substeps = 16;
    double beta_prev = 0.0;
    bool first = true;
    double worst_rho = 0.0, worst_w = 0.0;
    {
        auto [r0, w0] = observables(chart_to_full(*chart, x), beta_prev, first);
        first = false;
        worst_rho = std::abs(r0 - rho_ref[0]);
        worst_w = std::abs(w0 - w_ref[0]);
    }

    for (int k = 1; k < static_cast<int>(t_ref.size()); ++k) {
        OdeRhs rhs = [&](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
            dy = chart->red.system.eom_rhs(y);
        };
        x = integrate_rk4(rhs, t_ref[k - 1], x, t_ref[k], substeps);

        Eigen::VectorXd now = chart_to_full(*chart, x);
        // chart health: switch when the active denominator coordinate shrinks
        const double health = chart->eliminated == 0 ? std::abs(now[3]) : std::abs(now[2]);
        const double other = chart->eliminated == 0 ? std::abs(now[2]) : std::abs(now[3]);
        if (health < 0.5 * other) {
            chart = chart->eliminated == 0 ? &chart_b : &chart_a;
            x = full_to_chart(*chart, now);
            now = chart_to_full(*chart, x);
        }
        auto [r, w] = observables(now, beta_prev, false);
        worst_rho = std::max(worst_rho, std::abs(r - rho_ref[k]));
        worst_w = std::max(worst_w, std::abs(w - w_ref[k]) / std::max(1.0, std::abs(w_ref[k])));
    }

    std::ostringstream out;
    out << "one emergent pair (canonical_dim 2); over one period |rho_red - rho_orig| <= "
        << worst_rho << ", relative |w_red - w_orig| <= " << worst_w << " (tol 1e-6)";
    return {worst_rho < 1e-6 && worst_w < 1e-6, out.str()};
}

// ---------------------------------------------------------------------- 8
Outcome criterion_koopman() {
    double worst_phase = 0.0;
    for (double omega : {1.0, 3.0}) {
        const auto sys = rotation_system(omega);
        const auto sp = split(sys, Eigen::VectorXd::Ones(1) * omega);
        const auto traj =
            integrate(sys, vec2(1.0, 0.0), vec2(0.0, -omega), 3 * pi / omega);
        const auto orbit = orbit_spectrum(sys, traj, sp, 8);
        const auto phases = koopman_orbit_phases(sys, vec2(1.0, 0.0), 8);
        for (int n = 0; n <= 8; ++n)
            worst_phase =
                std::max(worst_phase, std::abs(phases[n] - orbit.levels[n]) /
                                          std::max(1.0, orbit.levels[n]));
    }

    const auto sys = rotation_system();
    const auto rho = GridDensity::gaussian(vec2(-2, -2), vec2(2, 2), {256, 256},
                                           vec2(1.0, 0.0), 0.25);
    PropagateOptions popts;
    popts.n_steps = 64;
    popts.boundary = BoundaryPolicy::ZeroOutside;
    popts.n_threads = 2;
    const auto prop = propagate(rho, sys, 2 * pi, popts);
    const double l1 = prop.density.l1_distance(rho) / rho.l1_norm();

    std::ostringstream out;
    out << "phase ladder mismatch <= " << worst_phase
        << " (independent routes), one-period L1 return error " << l1
        << " (tol 5e-2) at 256^2";
    return {worst_phase < 1e-9 && l1 < 5e-2, out.str()};
}

} // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "three-state clock spectrum", criterion_three_state_clock},
        {2, "four-state universe quotient", criterion_four_state_universe},
        {3, "positive splitting identities", criterion_splitting_identities},
        {4, "orbit quantization ladder", criterion_orbit_quantization},
        {5, "path concentration scaling", criterion_path_concentration},
        {6, "fluctuation determinant identity", criterion_determinant_identity},
        {7, "information-loss reduction", criterion_fj_reduction},
        {8, "koopman cross-check", criterion_koopman},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        Outcome outcome;
        try {
            outcome = c.run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        std::printf("criterion %d [%s] %s: %s\n", c.id,
                    outcome.pass ? "PASS" : "FAIL", c.name, outcome.detail.c_str());
        std::fflush(stdout);
        if (!outcome.pass) ++failures;
    }
    if (failures == 0) {
        std::printf("acceptance: all %zu criteria passed\n", criteria.size());
        return 0;
    }
    std::printf("acceptance: %d of %zu criteria FAILED\n", failures, criteria.size());
    return 1;
}

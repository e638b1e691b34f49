#include "ontolab/hooft.hpp"

#include "ontolab/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace ontolab {

namespace {

Eigen::VectorXd pack_phase(const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
    Eigen::VectorXd x(q.size() + p.size());
    x << p, q; // field variable order is (p_1..p_N, q_1..q_N)
    return x;
}

std::string point_to_string(const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
    std::ostringstream out;
    out << "q = (";
    for (int i = 0; i < q.size(); ++i) out << (i ? ", " : "") << q[i];
    out << "), p = (";
    for (int i = 0; i < p.size(); ++i) out << (i ? ", " : "") << p[i];
    out << ")";
    return out.str();
}

} // namespace

void ScalarField::exact_gradient(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                                 Eigen::VectorXd& grad_q, Eigen::VectorXd& grad_p) const {
    if (!symbolic)
        throw std::logic_error("ScalarField: no symbolic form for exact gradient");
    const Eigen::VectorXd x = pack_phase(q, p);
    const Eigen::VectorXd g = symbolic->gradient(x);
    grad_p = g.head(dim);
    grad_q = g.tail(dim);
}

ScalarField ScalarField::from_phase_rational(int dim, Rational r, std::string name) {
    if (r.nvars() != 2 * dim)
        throw std::invalid_argument("from_phase_rational: expected 2N variables");
    ScalarField f;
    f.name = std::move(name);
    f.dim = dim;
    f.symbolic = r;
    f.value = [r](const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
        return r.eval(pack_phase(q, p));
    };
    return f;
}

ScalarField ScalarField::from_q_polynomial(const Polynomial& poly, std::string name) {
    const int dim = poly.nvars();
    std::vector<int> map(dim);
    for (int i = 0; i < dim; ++i) map[i] = dim + i; // q_i sits at index N+i
    return from_phase_rational(dim, Rational(poly.remap(2 * dim, map)), std::move(name));
}

THooftSystem::THooftSystem(FlowField f, std::vector<ScalarField> ch, double box_half_width)
    : flow(std::move(f)), charges(std::move(ch)) {
    const int n = flow.dim;
    box_q_lo = Eigen::VectorXd::Constant(n, -box_half_width);
    box_q_hi = Eigen::VectorXd::Constant(n, box_half_width);
    box_p_lo = box_q_lo;
    box_p_hi = box_q_hi;
    for (const auto& c : charges)
        if (c.dim != n)
            throw std::invalid_argument("THooftSystem: charge dimension mismatch");
}

ScalarField THooftSystem::hamiltonian() const {
    const int n = dim();
    if (flow.is_polynomial()) {
        std::vector<int> qmap(n);
        for (int i = 0; i < n; ++i) qmap[i] = n + i;
        Polynomial h(2 * n);
        for (int a = 0; a < n; ++a)
            h = h + Polynomial::variable(2 * n, a) * flow.components[a].remap(2 * n, qmap);
        return ScalarField::from_phase_rational(n, Rational(h), "H");
    }
    ScalarField f;
    f.name = "H";
    f.dim = n;
    const FlowField fl = flow;
    f.value = [fl](const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
        return p.dot(fl(q));
    };
    return f;
}

THooftSystem::ChargeCheck THooftSystem::verify_charges(double tol, int n_samples,
                                                       std::uint64_t seed) const {
    ChargeCheck out;
    const ScalarField h = hamiltonian();
    SplitMix64 rng(seed);
    for (int s = 0; s < n_samples; ++s) {
        Eigen::VectorXd q(dim()), p(dim());
        for (int i = 0; i < dim(); ++i) {
            q[i] = rng.uniform(box_q_lo[i], box_q_hi[i]);
            p[i] = rng.uniform(box_p_lo[i], box_p_hi[i]);
        }
        for (const auto& c : charges) {
            const auto br = poisson_bracket(c, h, q, p);
            out.max_bracket = std::max(out.max_bracket, std::abs(br.value));
        }
    }
    out.ok = out.max_bracket < tol;
    return out;
}

Trajectory integrate(const THooftSystem& sys, const Eigen::VectorXd& q0,
                     const Eigen::VectorXd& p0, double t_final,
                     const IntegrateOptions& opts) {
    const int n = sys.dim();
    if (q0.size() != n || p0.size() != n)
        throw ValidationError("integrate: initial condition dimension mismatch");
    if (!(t_final > 0)) throw ValidationError("integrate: t_final must be positive");

    const bool mono = opts.with_monodromy;
    const int state_size = mono ? 2 * n + n * n : 2 * n;

    Eigen::VectorXd y0(state_size);
    y0.head(n) = q0;
    y0.segment(n, n) = p0;
    if (mono) {
        Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
        y0.tail(n * n) = Eigen::Map<const Eigen::VectorXd>(id.data(), n * n);
    }

    const FlowField& flow = sys.flow;
    OdeRhs rhs = [&flow, n, mono](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
        dy.resize(y.size());
        const Eigen::VectorXd q = y.head(n);
        Eigen::VectorXd f(n);
        flow.eval(q, f);
        Eigen::MatrixXd jac(n, n);
        flow.jacobian(q, jac);
        dy.head(n) = f;
        dy.segment(n, n) = -jac.transpose() * y.segment(n, n);
        if (mono) {
            const Eigen::Map<const Eigen::MatrixXd> m(y.tail(n * n).data(), n, n);
            Eigen::MatrixXd dm = jac * m;
            dy.tail(n * n) = Eigen::Map<const Eigen::VectorXd>(dm.data(), n * n);
        }
    };

    OdeOptions ode_opts;
    ode_opts.rel_tol = opts.rel_tol;
    ode_opts.abs_tol = opts.abs_tol;
    ode_opts.max_step = opts.max_step;
    ode_opts.checkpoints = opts.checkpoints;

    const OdeSolution sol = integrate_rk45(rhs, 0.0, y0, t_final, ode_opts);

    Trajectory traj;
    traj.times.reserve(sol.samples.size());
    traj.q.reserve(sol.samples.size());
    traj.p.reserve(sol.samples.size());
    traj.qdot.reserve(sol.samples.size());
    for (const auto& s : sol.samples) {
        traj.times.push_back(s.t);
        traj.q.push_back(s.y.head(n));
        traj.p.push_back(s.y.segment(n, n));
        traj.qdot.push_back(flow(s.y.head(n)));
    }
    traj.checkpoint_index = sol.checkpoint_index;
    if (mono) {
        const auto& yf = sol.samples.back().y;
        traj.monodromy = Eigen::Map<const Eigen::MatrixXd>(yf.tail(n * n).data(), n, n);
    } else {
        traj.monodromy = Eigen::MatrixXd::Identity(n, n);
    }
    traj.meta = {opts.rel_tol, opts.abs_tol, sol.n_steps, sol.n_rejected};
    return traj;
}

Eigen::VectorXd flow_state_at(const THooftSystem& sys, const Trajectory& traj, double t) {
    if (traj.times.empty()) throw ValidationError("flow_state_at: empty trajectory");
    // nearest stored sample not after t
    auto it = std::upper_bound(traj.times.begin(), traj.times.end(), t);
    int k = static_cast<int>(it - traj.times.begin()) - 1;
    k = std::clamp(k, 0, static_cast<int>(traj.times.size()) - 1);

    const double t0 = traj.times[k];
    Eigen::VectorXd q = traj.q[k];
    if (std::abs(t - t0) < 1e-15) return q;

    const FlowField& flow = sys.flow;
    OdeRhs rhs = [&flow](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
        dy.resize(y.size());
        flow.eval(y, dy);
    };
    if (t > t0) {
        OdeOptions opts;
        opts.rel_tol = 1e-12;
        opts.abs_tol = 1e-14;
        return integrate_rk45(rhs, t0, q, t, opts).samples.back().y;
    }
    // short backwards hop: reverse the field
    OdeRhs back = [&flow](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
        dy.resize(y.size());
        flow.eval(y, dy);
        dy = -dy;
    };
    OdeOptions opts;
    opts.rel_tol = 1e-12;
    opts.abs_tol = 1e-14;
    return integrate_rk45(back, 0.0, q, t0 - t, opts).samples.back().y;
}

BracketResult poisson_bracket(const ScalarField& f, const ScalarField& g,
                              const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                              double h, BracketMode mode) {
    const int n = static_cast<int>(q.size());
    if (mode == BracketMode::Auto && f.has_exact_gradient() && g.has_exact_gradient()) {
        Eigen::VectorXd fq(n), fp(n), gq(n), gp(n);
        f.exact_gradient(q, p, fq, fp);
        g.exact_gradient(q, p, gq, gp);
        return {fq.dot(gp) - fp.dot(gq), 0.0};
    }

    auto fd_bracket = [&](double step) {
        double acc = 0.0;
        Eigen::VectorXd qa = q, pa = p;
        for (int i = 0; i < n; ++i) {
            const double hq = step * (1.0 + std::abs(q[i]));
            const double hp = step * (1.0 + std::abs(p[i]));
            qa[i] = q[i] + hq;
            const double f_qp = f(qa, p), g_qp = g(qa, p);
            qa[i] = q[i] - hq;
            const double f_qm = f(qa, p), g_qm = g(qa, p);
            qa[i] = q[i];
            pa[i] = p[i] + hp;
            const double f_pp = f(q, pa), g_pp = g(q, pa);
            pa[i] = p[i] - hp;
            const double f_pm = f(q, pa), g_pm = g(q, pa);
            pa[i] = p[i];
            const double df_dq = (f_qp - f_qm) / (2 * hq);
            const double dg_dq = (g_qp - g_qm) / (2 * hq);
            const double df_dp = (f_pp - f_pm) / (2 * hp);
            const double dg_dp = (g_pp - g_pm) / (2 * hp);
            acc += df_dq * dg_dp - df_dp * dg_dq;
        }
        return acc;
    };

    const double v_h = fd_bracket(h);
    const double v_h2 = fd_bracket(h / 2);
    // two central-difference stencils, Richardson-combined; their spread
    // estimates the remaining truncation error
    return {(4.0 * v_h2 - v_h) / 3.0, std::abs(v_h - v_h2) / 3.0};
}

SplitHamiltonian split(const THooftSystem& sys, const Eigen::VectorXd& a,
                       const SplitOptions& opts) {
    if (a.size() != static_cast<Eigen::Index>(sys.charges.size()))
        throw ValidationError("split: coefficient count must match charge count");
    if (sys.charges.empty())
        throw ValidationError("split: system has no registered charges");

    const int n = sys.dim();
    SplitHamiltonian sp;
    sp.coefficients = a;
    sp.hamiltonian = sys.hamiltonian();

    // rho = a_i C^i
    const std::vector<ScalarField> charges = sys.charges;
    const Eigen::VectorXd coeff = a;
    sp.rho.name = "rho";
    sp.rho.dim = n;
    sp.rho.value = [charges, coeff](const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
        double r = 0.0;
        for (Eigen::Index i = 0; i < coeff.size(); ++i) r += coeff[i] * charges[i](q, p);
        return r;
    };
    bool symbolic_ok = sp.hamiltonian.symbolic.has_value();
    for (const auto& c : charges) symbolic_ok = symbolic_ok && c.symbolic.has_value();
    if (symbolic_ok) {
        Rational rho_sym = Rational::constant(2 * n, 0.0);
        for (Eigen::Index i = 0; i < coeff.size(); ++i)
            rho_sym = rho_sym + *charges[i].symbolic * coeff[i];
        sp.rho.symbolic = rho_sym;

        const Rational h_sym = *sp.hamiltonian.symbolic;
        const Rational plus = (h_sym + rho_sym) * (h_sym + rho_sym) / (rho_sym * 4.0);
        const Rational minus = (h_sym - rho_sym) * (h_sym - rho_sym) / (rho_sym * 4.0);
        sp.h_plus.symbolic = plus;
        sp.h_minus.symbolic = minus;
        if (h_sym.is_polynomial() && rho_sym.is_polynomial())
            sp.information_loss_root =
                (h_sym.as_polynomial() - rho_sym.as_polynomial()).pruned();
    }

    const ScalarField h_field = sp.hamiltonian;
    const ScalarField rho_field = sp.rho;
    sp.h_plus.name = "H+";
    sp.h_plus.dim = n;
    sp.h_plus.value = [h_field, rho_field](const Eigen::VectorXd& q,
                                           const Eigen::VectorXd& p) {
        const double h = h_field(q, p), r = rho_field(q, p);
        return (h + r) * (h + r) / (4.0 * r);
    };
    sp.h_minus.name = "H-";
    sp.h_minus.dim = n;
    sp.h_minus.value = [h_field, rho_field](const Eigen::VectorXd& q,
                                            const Eigen::VectorXd& p) {
        const double h = h_field(q, p), r = rho_field(q, p);
        return (h - r) * (h - r) / (4.0 * r);
    };

    // verification grid: positivity of rho first, identities second
    SplitMix64 rng(opts.seed);
    std::vector<Eigen::VectorXd> grid_q, grid_p;
    for (int s = 0; s < opts.n_samples; ++s) {
        Eigen::VectorXd q(n), p(n);
        for (int i = 0; i < n; ++i) {
            q[i] = rng.uniform(sys.box_q_lo[i], sys.box_q_hi[i]);
            p[i] = rng.uniform(sys.box_p_lo[i], sys.box_p_hi[i]);
        }
        if (sp.rho(q, p) <= 0.0)
            throw std::domain_error("split: rho <= 0 at sample point " +
                                    point_to_string(q, p) +
                                    "; the splitting is singular there");
        grid_q.push_back(std::move(q));
        grid_p.push_back(std::move(p));
    }

    int checked = 0;
    for (int s = 0; s < opts.n_samples; ++s) {
        const Eigen::VectorXd& q = grid_q[s];
        const Eigen::VectorXd& p = grid_p[s];
        const double r = sp.rho(q, p);
        if (r < opts.min_rho) continue; // too close to the 1/rho pole to test
        ++checked;

        const double h = sp.hamiltonian(q, p);
        const double plus = sp.h_plus(q, p);
        const double minus = sp.h_minus(q, p);
        const double scale = std::max({1.0, std::abs(h), plus, minus});
        if (std::abs(plus - minus - h) > opts.identity_tol * scale)
            throw NumericalError("split: H+ - H- != H at " + point_to_string(q, p));
        if (plus < -opts.identity_tol * scale || minus < -opts.identity_tol * scale)
            throw NumericalError("split: negative branch at " + point_to_string(q, p));

        const auto br = poisson_bracket(sp.h_plus, sp.h_minus, q, p, opts.fd_step,
                                        BracketMode::FiniteDifference);
        if (std::abs(br.value) > opts.bracket_tol * scale * scale)
            throw NumericalError("split: {H+, H-} != 0 at " + point_to_string(q, p));
    }
    if (checked < opts.n_samples / 8)
        throw std::domain_error(
            "split: rho exceeds the testable threshold on almost none of the declared "
            "box; shrink the box or rescale the charges");
    return sp;
}

std::optional<PeriodDetection> find_first_return(const THooftSystem& sys,
                                                 const Trajectory& traj, double delta) {
    if (traj.times.size() < 4) return std::nullopt;
    const Eigen::VectorXd q0 = traj.q.front();
    const int m = static_cast<int>(traj.times.size());

    std::vector<double> dist(m);
    double d_max = 0.0;
    for (int k = 0; k < m; ++k) {
        dist[k] = (traj.q[k] - q0).norm();
        d_max = std::max(d_max, dist[k]);
    }
    if (d_max < 100 * delta) return std::nullopt; // never left the neighborhood

    const FlowField& flow = sys.flow;
    auto refine = [&](double t_guess) -> std::optional<double> {
        double t = t_guess;
        for (int iter = 0; iter < 12; ++iter) {
            const Eigen::VectorXd qt = flow_state_at(sys, traj, t);
            const Eigen::VectorXd f = flow(qt);
            const Eigen::MatrixXd jac = flow.jac(qt);
            const double g = (qt - q0).dot(f);
            const double gp = f.squaredNorm() + (qt - q0).dot(jac * f);
            if (gp == 0.0) return std::nullopt;
            const double step = g / gp;
            t -= step;
            if (t <= 0.0 || t > traj.t_final()) return std::nullopt;
            if (std::abs(step) < 1e-14 * std::max(1.0, t)) break;
        }
        return t;
    };

    for (int k = 1; k + 1 < m; ++k) {
        const bool local_min = dist[k] <= dist[k - 1] && dist[k] <= dist[k + 1];
        if (!local_min) continue;
        if (dist[k] > 0.25 * d_max) continue;      // shallow wiggle, not a return
        const double tail = *std::max_element(dist.begin(), dist.begin() + k + 1);
        if (tail < 0.5 * d_max) continue;          // has not gone around yet
        const auto t_ref = refine(traj.times[k]);
        if (!t_ref) continue;
        const Eigen::VectorXd q_ret = flow_state_at(sys, traj, *t_ref);
        const double closure = (q_ret - q0).norm();
        if (closure < delta) return PeriodDetection{*t_ref, closure};
    }
    return std::nullopt;
}

OrbitSpectrum orbit_spectrum(const THooftSystem& sys, const Trajectory& traj,
                             const SplitHamiltonian& sp, int n_max,
                             const OrbitOptions& opts) {
    if (traj.qdot.front().norm() == 0.0)
        throw NumericalError("orbit_spectrum: degenerate orbit, flow vanishes at q(0)");
    const auto ret = find_first_return(sys, traj, opts.delta);
    if (!ret)
        throw NumericalError(
            "orbit_spectrum: aperiodic orbit, no return to q(0) within the window");

    OrbitSpectrum out;
    out.period = ret->period;
    out.rho_value = sp.rho(traj.q.front(), traj.p.front());
    out.levels.reserve(n_max + 1);
    for (int k = 0; k <= n_max; ++k)
        out.levels.push_back(2.0 * std::numbers::pi * k / out.period);

    const double phase = out.rho_value * out.period / (2.0 * std::numbers::pi);
    out.quantization_residual = std::abs(phase - std::round(phase));
    out.quantization_consistent = out.quantization_residual < opts.quantization_tol;
    return out;
}

} // namespace ontolab

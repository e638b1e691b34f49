#pragma once

#include "ontolab/flow.hpp"
#include "ontolab/ode.hpp"
#include "ontolab/polynomial.hpp"

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ontolab {

/// Scalar field on phase space. Symbolic form, when present, is a Rational in
/// the 2N variables ordered (p_1..p_N, q_1..q_N); gradients then come from
/// the symbolic partials, otherwise the field is numeric-only.
struct ScalarField {
    std::string name;
    int dim = 0; // configuration dimension N
    std::function<double(const Eigen::VectorXd& q, const Eigen::VectorXd& p)> value;
    std::optional<Rational> symbolic;

    double operator()(const Eigen::VectorXd& q, const Eigen::VectorXd& p) const {
        return value(q, p);
    }
    bool has_exact_gradient() const { return symbolic.has_value(); }
    /// d/dq and d/dp from the symbolic form; throws when absent.
    void exact_gradient(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                        Eigen::VectorXd& grad_q, Eigen::VectorXd& grad_p) const;

    static ScalarField from_phase_rational(int dim, Rational r, std::string name);
    /// Lift a polynomial in q_1..q_N to a p-independent phase-space field.
    static ScalarField from_q_polynomial(const Polynomial& poly, std::string name);
};

/// Flow system with Hamiltonian H = p . f(q), conserved charges C^i(q), and a
/// declared sampling box on phase space used for verification grids.
struct THooftSystem {
    FlowField flow;
    std::vector<ScalarField> charges;
    Eigen::VectorXd box_q_lo, box_q_hi; // per-dimension configuration box
    Eigen::VectorXd box_p_lo, box_p_hi;

    THooftSystem() = default;
    THooftSystem(FlowField f, std::vector<ScalarField> ch, double box_half_width = 2.0);

    int dim() const { return flow.dim; }
    /// H = p_a f^a(q); symbolic when the flow is polynomial.
    ScalarField hamiltonian() const;

    struct ChargeCheck {
        bool ok = false;
        double max_bracket = 0.0; // worst |{C^i, H}| over the sample box
    };
    ChargeCheck verify_charges(double tol = 1e-8, int n_samples = 100,
                               std::uint64_t seed = 20260808) const;
};

/// Integrated orbit of the coupled system q' = f(q), p' = -Jf(q)^T p,
/// together with the configuration-space monodromy dq(t)/dq(0).
struct Trajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> q, p;
    std::vector<Eigen::VectorXd> qdot; // f(q) at every sample
    std::vector<int> checkpoint_index;
    Eigen::MatrixXd monodromy;
    struct Meta {
        double rel_tol = 0, abs_tol = 0;
        long n_steps = 0, n_rejected = 0;
    } meta;

    int dim() const { return static_cast<int>(q.empty() ? 0 : q.front().size()); }
    double t_final() const { return times.back(); }
};

struct IntegrateOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double max_step = std::numeric_limits<double>::infinity();
    std::vector<double> checkpoints;
    bool with_monodromy = true;
};

Trajectory integrate(const THooftSystem& sys, const Eigen::VectorXd& q0,
                     const Eigen::VectorXd& p0, double t_final,
                     const IntegrateOptions& opts = {});

/// Configuration point q(t) reconstructed from the nearest stored sample.
Eigen::VectorXd flow_state_at(const THooftSystem& sys, const Trajectory& traj, double t);

enum class BracketMode { Auto, FiniteDifference };

struct BracketResult {
    double value = 0.0;
    double est_truncation = 0.0; // 0 when exact gradients were used
};

/// Poisson bracket {F, G} at a phase-space point. Exact symbolic gradients are
/// used when both fields carry them (Auto); otherwise central differences with
/// per-coordinate step h*(1+|x_i|) and a Richardson error estimate.
BracketResult poisson_bracket(const ScalarField& f, const ScalarField& g,
                              const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                              double h = 1e-5, BracketMode mode = BracketMode::Auto);

/// The positive splitting H = H+ - H- built from rho = a_i C^i:
/// H+- = (H +- rho)^2 / (4 rho), both non-negative wherever rho > 0.
struct SplitHamiltonian {
    ScalarField rho;
    ScalarField h_plus, h_minus;
    ScalarField hamiltonian;
    Eigen::VectorXd coefficients;
    /// H - rho: vanishes exactly where H- does (on rho > 0); available when
    /// the system is polynomial. This is the form the reduction engine solves.
    std::optional<Polynomial> information_loss_root;
};

struct SplitOptions {
    int n_samples = 200;
    std::uint64_t seed = 987654321;
    double min_rho = 1e-2;     // identity checks skip points closer to the pole
    double identity_tol = 1e-12;
    double bracket_tol = 1e-8;
    double fd_step = 1e-5;
};

/// Build and verify the splitting. Throws std::domain_error naming the point
/// when rho <= 0 is encountered on the verification grid.
SplitHamiltonian split(const THooftSystem& sys, const Eigen::VectorXd& a,
                       const SplitOptions& opts = {});

struct PeriodDetection {
    double period = 0.0;
    double closure_distance = 0.0;
};

/// First return of the configuration orbit to q(0): sample scan for a local
/// minimum of |q(t)-q(0)| followed by Newton refinement on
/// (q(t)-q0).f(q(t)) = 0. Empty when the orbit does not come back within the
/// integrated window or misses q0 by more than delta.
std::optional<PeriodDetection> find_first_return(const THooftSystem& sys,
                                                 const Trajectory& traj,
                                                 double delta = 1e-8);

struct OrbitSpectrum {
    double period = 0.0;
    double rho_value = 0.0;
    std::vector<double> levels; // 2*pi*n / period for n = 0..n_max
    bool quantization_consistent = false; // rho * T close to 2*pi * integer
    double quantization_residual = 0.0;
};

struct OrbitOptions {
    double delta = 1e-8;
    double quantization_tol = 1e-6;
};

/// Energy ladder of a closed orbit. Levels are emitted for n >= 0 only.
/// Throws NumericalError("aperiodic...") when no return is found.
OrbitSpectrum orbit_spectrum(const THooftSystem& sys, const Trajectory& traj,
                             const SplitHamiltonian& sp, int n_max,
                             const OrbitOptions& opts = {});

} // namespace ontolab

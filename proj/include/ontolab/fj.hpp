#pragma once

#include "ontolab/polynomial.hpp"

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ontolab {

/// Antisymmetric matrix of rational entries, used once an elimination makes
/// the presymplectic kinetic matrix coordinate-dependent.
struct RationalMatrix {
    int n = 0;
    std::vector<Rational> entries; // row-major

    const Rational& at(int i, int j) const { return entries[i * n + j]; }
    Rational& at(int i, int j) { return entries[i * n + j]; }
    Eigen::MatrixXd eval(const Eigen::VectorXd& x) const;
    bool is_constant() const;
    Eigen::MatrixXd constant_value() const;
    RationalMatrix without(int var) const; // delete row/col and the variable
};

using KineticMatrix = std::variant<Eigen::MatrixXd, RationalMatrix>;

/// First-order Lagrangian L = 1/2 xi^T f(xi) xi' - V(xi), optionally with
/// Lagrange-multiplier terms eta * phi(xi). Multipliers are ordinary
/// velocity-free variables: a zero kinetic row and a product term in V.
class FirstOrderLagrangian {
public:
    FirstOrderLagrangian(std::vector<std::string> names, KineticMatrix kinetic,
                         Rational potential);

    /// Canonical 2N-dimensional Lagrangian with the stacked symplectic matrix
    /// (variables p_1..p_N, q_1..q_N) and the given Hamiltonian.
    static FirstOrderLagrangian canonical(int n_pairs, Rational hamiltonian);

    /// Append a multiplier variable enforcing constraint = 0.
    void add_multiplier(const Rational& constraint, const std::string& label);

    int dim() const { return static_cast<int>(names_.size()); }
    const std::vector<std::string>& names() const { return names_; }
    const KineticMatrix& kinetic() const { return kinetic_; }
    const Rational& potential() const { return potential_; }
    const std::vector<int>& multiplier_indices() const { return multiplier_indices_; }

    bool kinetic_is_constant() const;
    Eigen::MatrixXd kinetic_at(const Eigen::VectorXd& x) const;
    Eigen::VectorXd potential_gradient(const Eigen::VectorXd& x) const;

    /// Velocity solving f(x) x' = grad V(x). Uses an LU solve for invertible
    /// constant kinetic matrices and the minimum-norm least-squares solution
    /// otherwise (the kernel directions carry no dynamics of their own).
    Eigen::VectorXd eom_rhs(const Eigen::VectorXd& x) const;

    void set_reference_point(const Eigen::VectorXd& x) { reference_ = x; }
    const std::optional<Eigen::VectorXd>& reference_point() const { return reference_; }

private:
    std::vector<std::string> names_;
    KineticMatrix kinetic_;
    Rational potential_;
    std::vector<int> multiplier_indices_;
    std::optional<Eigen::VectorXd> reference_;
};

/// Stacked canonical symplectic matrix [[0, I], [-I, 0]] on n_pairs pairs.
Eigen::MatrixXd symplectic_omega(int n_pairs);

struct ZeroModeBasis {
    Eigen::MatrixXd modes; // orthonormal kernel basis, one column per mode
    Eigen::VectorXd singular_values;
    double tolerance = 0.0;
    int rank = 0;

    int count() const { return static_cast<int>(modes.cols()); }
};

/// Kernel of an antisymmetric matrix by SVD. The numerical rank counts
/// singular values above tol * sigma_max.
ZeroModeBasis zero_modes(const Eigen::MatrixXd& f, double tol = 1e-10);

struct SkewNormalForm {
    Eigen::MatrixXd transform;     // T with T^T f T = diag(omega_r, 0)
    Eigen::MatrixXd inverse;       // T^-1
    int rank = 0;
    double residual = 0.0;
};

/// Real congruence bringing a constant antisymmetric matrix to the stacked
/// canonical block diag(omega_rank, 0).
SkewNormalForm skew_normal_form(const Eigen::MatrixXd& f, double tol = 1e-10);

/// Linear Darboux transform of an invertible constant antisymmetric matrix:
/// T with T^T f T = omega, identity when f is already canonical. Throws when
/// f is singular (strip the zero modes first).
Eigen::MatrixXd darboux(const Eigen::MatrixXd& f);

struct EliminationStep {
    enum class Kind {
        MultiplierConstraint, // a zero-mode equation produced a constraint
        SolvedVariable,       // a variable was solved and substituted out
        DroppedDecoupled,     // variable absent from kinetic term and potential
        GaugeDirection,       // kernel direction with identically zero gradient
        LinearChange,         // Darboux-style change of coordinates
        Stuck                 // outside the supported class
    };
    Kind kind;
    std::string variable; // affected variable or empty
    std::string detail;   // human-readable payload (expressions, residuals)
    /// For SolvedVariable steps: the solved expression in the surviving
    /// variables, usable to reconstruct the eliminated coordinate.
    std::optional<Rational> solved_expression;
};

std::string to_string(EliminationStep::Kind kind);

struct ReducedSystem {
    FirstOrderLagrangian system;
    int canonical_dim = 0; // surviving phase-space dimension (pairs * 2)
    bool stuck = false;
    std::vector<Rational> constraints; // the phi fields found along the way
    std::vector<EliminationStep> elimination_log;

    const Rational& reduced_hamiltonian() const { return system.potential(); }
};

struct FjOptions {
    double svd_tol = 1e-10;       // zero-mode detection, relative to sigma_max
    double zero_tol = 1e-11;      // treating symbolic fields as zero
    double gauge_tol = 1e-8;      // |v . grad V| / (1 + |grad V|) on samples
    int gauge_samples = 8;
    int max_rounds = 16;
    /// Force the first constraint elimination onto this variable index
    /// (chart selection); default is lowest solvable index.
    std::optional<int> first_target;
};

/// Eliminate variable `index` from a constant-kinetic Lagrangian using a
/// constraint that is affine in it: the kinetic matrix picks up the usual
/// antisymmetrized bracket correction and the potential is substituted.
/// Throws ValidationError when the constraint is outside the supported class.
FirstOrderLagrangian eliminate_coordinate(const FirstOrderLagrangian& lagr, int index,
                                          const Rational& constraint,
                                          EliminationStep* step = nullptr);

/// The iterative reduction loop: zero modes -> constraints -> solve or
/// record -> substitute -> Darboux, repeated until the kinetic matrix is
/// invertible on the surviving variables or nothing further is solvable.
ReducedSystem fj_reduce(const FirstOrderLagrangian& lagr, const FjOptions& opts = {});

} // namespace ontolab

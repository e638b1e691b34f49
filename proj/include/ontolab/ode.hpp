#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <vector>

namespace ontolab {

/// Thrown when a numerical procedure cannot continue (step underflow,
/// aperiodic orbit, characteristics leaving the domain, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown on invalid inputs or configuration.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using OdeRhs = std::function<void(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy)>;

struct OdeOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double max_step = std::numeric_limits<double>::infinity();
    /// Times the integrator must land on exactly (sorted, within [t0, t1]).
    std::vector<double> checkpoints;
};

struct OdeSample {
    double t;
    Eigen::VectorXd y;
};

struct OdeSolution {
    std::vector<OdeSample> samples;  // accepted steps, checkpoints included
    std::vector<int> checkpoint_index; // samples[] position of each checkpoint
    long n_steps = 0;
    long n_rejected = 0;
};

/// Adaptive Dormand-Prince 4(5) integration from t0 to t1 (t1 > t0).
/// Every accepted step is recorded; requested checkpoints are hit exactly by
/// clipping the step size. Throws NumericalError on step underflow, with the
/// last good time in the message.
OdeSolution integrate_rk45(const OdeRhs& rhs, double t0, const Eigen::VectorXd& y0,
                           double t1, const OdeOptions& opts = {});

/// Classic fixed-step RK4; returns the final state only.
Eigen::VectorXd integrate_rk4(const OdeRhs& rhs, double t0, const Eigen::VectorXd& y0,
                              double t1, int n_steps);

} // namespace ontolab

#pragma once

#include "ontolab/hooft.hpp"

#include <Eigen/Dense>
#include <vector>

namespace ontolab {

/// Non-negative density sampled on a regular grid over a box in
/// configuration space. Values are stored row-major with the last dimension
/// fastest.
struct GridDensity {
    Eigen::VectorXd lo, hi;      // box corners, one entry per dimension
    std::vector<int> resolution; // nodes per dimension
    std::vector<double> values;

    int dim() const { return static_cast<int>(resolution.size()); }
    std::size_t size() const { return values.size(); }
    double spacing(int d) const { return (hi[d] - lo[d]) / (resolution[d] - 1); }
    double cell_volume() const;
    double mass() const;
    double l1_norm() const;
    double l2_norm() const;
    double l1_distance(const GridDensity& other) const;

    Eigen::VectorXd node(std::size_t flat_index) const;
    /// Multilinear interpolation; out_of_box decides what happens outside.
    double interpolate(const Eigen::VectorXd& x) const;
    bool inside(const Eigen::VectorXd& x) const;

    /// First moment <q> of the normalized density.
    Eigen::VectorXd mean() const;

    static GridDensity zeros(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                             const std::vector<int>& resolution);
    /// Isotropic Gaussian blob, normalized to unit mass on the grid.
    static GridDensity gaussian(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                const std::vector<int>& resolution,
                                const Eigen::VectorXd& center, double width);

    /// Flat-CSV interchange format: a JSON header line carrying the box and
    /// resolution, a "value" column header, then one value per line.
    std::string to_csv() const;
    static GridDensity from_csv(const std::string& text);
};

enum class BoundaryPolicy {
    Error,      // characteristics leaving the box abort the propagation
    ZeroOutside,// density vanishes outside the box (compact support)
    Periodic    // wrap coordinates back into the box
};

struct PropagateOptions {
    int n_steps = 1;   // semi-Lagrangian substeps over the full interval
    BoundaryPolicy boundary = BoundaryPolicy::Error;
    int n_threads = 1;
    double exit_tolerance = 0.0; // admissible exit fraction under Error policy
};

struct PropagateResult {
    GridDensity density;
    double mass_drift = 0.0;    // |m(t) - m(0)| / m(0)
    double exit_fraction = 0.0; // fraction of nodes whose source left the box
};

/// Semi-Lagrangian transport of the density under q' = f(q): every node is
/// pulled back along the flow and the start density is interpolated there.
/// With n_steps = 1 the pull-back uses the adaptive integrator (exact-flow
/// map); with more substeps a fixed RK4 step per substep is used.
PropagateResult propagate(const GridDensity& rho, const THooftSystem& sys, double t,
                          const PropagateOptions& opts = {});

/// Koopman point spectrum on a closed orbit through q0: the fundamental
/// frequency is measured by counting oscillation cycles of the first
/// coordinate (refined zero crossings), never from the first-return period.
/// Returns {n * omega_0 : n = 0..n_max}. Throws NumericalError when the
/// observable does not oscillate (aperiodic orbit).
std::vector<double> koopman_orbit_phases(const THooftSystem& sys,
                                         const Eigen::VectorXd& q0, int n_max,
                                         double window = 0.0);

} // namespace ontolab

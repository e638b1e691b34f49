#pragma once

#include "ontolab/hooft.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace ontolab {

struct PathSamplingConfig {
    double t_start = 0.0;
    double t_end = 1.0;
    int n_slices = 64;
    double sigma = 0.1;      // width of the Gaussian replacing each delta
    int n_samples = 1000;
    std::uint64_t seed = 1;
    int n_threads = 1;
};

/// Monte Carlo ensemble of broken-line paths weighted by the Gaussian-smoothed
/// delta functional exp(-sum_j |q_{j+1}-q_j - f(qbar_j) dt|^2 / (2 sigma^2 dt))
/// with midpoint evaluation of the flow. Sampling is importance sampling with
/// free-bridge displacements around the classical trajectory; weights are
/// self-normalized.
struct DiscretizedPathEnsemble {
    PathSamplingConfig config;
    std::vector<double> slice_times;              // n_slices + 1 entries
    std::vector<Eigen::VectorXd> classical_path;  // at the slice times
    std::vector<std::vector<Eigen::VectorXd>> samples; // [sample][slice]
    std::vector<double> weights;                  // normalized to sum 1
    double effective_sample_size = 0.0;
};

DiscretizedPathEnsemble sample_paths(const THooftSystem& sys,
                                     const Eigen::VectorXd& q_start,
                                     const Eigen::VectorXd& q_end,
                                     const PathSamplingConfig& config);

/// First and second moments of the sampled ensemble against the classical path.
struct MomentReport {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> mean;
    std::vector<Eigen::VectorXd> classical;
    std::vector<double> sq_deviation;   // <|q_j - q_cl(t_j)|^2> per slice
    double mean_sq_deviation = 0.0;     // averaged over interior slices
    double max_mean_deviation = 0.0;    // max_j |mean_j - q_cl(t_j)|
    Eigen::MatrixXd covariance;         // <u(t_j) . u(t_k)> contraction
    double effective_sample_size = 0.0;
};

MomentReport moments(const DiscretizedPathEnsemble& ensemble);

/// Mean-square deviation against a ladder of smoothing widths, with the
/// log-log fitted exponent (2 for delta concentration).
struct ConcentrationReport {
    std::vector<double> sigmas;
    std::vector<double> mean_sq_deviation;
    double fitted_exponent = 0.0;
};

ConcentrationReport concentration_scan(const THooftSystem& sys,
                                       const Eigen::VectorXd& q_start,
                                       const Eigen::VectorXd& q_end,
                                       PathSamplingConfig config,
                                       const std::vector<double>& sigmas);

/// Functional determinant of the linearized flow operator d/dt - Df along the
/// classical trajectory, normalized so the free flow gives 1.
///
/// Route A discretizes the operator on n_slices midpoint blocks and
/// accumulates the banded initial-value determinant (Richardson-extrapolated
/// from n and n/2 slices). Route B is Liouville's identity exp(int tr Df dt)
/// evaluated by quadrature. Both are stored as log-determinants.
struct FluctuationDeterminant {
    double log_delta_route = 0.0;      // extrapolated banded determinant
    double log_delta_route_raw = 0.0;  // raw value at n_slices
    double log_delta_route_half = 0.0; // raw value at n_slices/2
    double log_monodromy_route = 0.0;  // trace quadrature
    int n_slices = 0;

    double value_delta() const { return std::exp(log_delta_route); }
    double value_monodromy() const { return std::exp(log_monodromy_route); }
};

FluctuationDeterminant fluctuation_determinant(const THooftSystem& sys,
                                               const Trajectory& traj, int n_slices);

/// Raw banded log-determinant at one resolution (exposed for convergence
/// ladders).
double banded_log_determinant(const THooftSystem& sys, const Eigen::VectorXd& q0,
                              double t_final, int n_slices);

/// Numerical shadow of the ghost-sector cancellation: the discretized
/// delta-functional Jacobian must equal the Jacobi determinant obtained from
/// the variational (monodromy) integration, so their ratio is 1 and the
/// concentrated measure carries no trajectory dependence.
struct GhostCancellationReport {
    double log_jacobian = 0.0;      // banded route
    double log_monodromy_det = 0.0; // det of the integrated monodromy matrix
    double residual = 0.0;          // |difference of the logs|
};

GhostCancellationReport ghost_cancellation_check(const THooftSystem& sys,
                                                 const Trajectory& traj, int n_slices);

} // namespace ontolab

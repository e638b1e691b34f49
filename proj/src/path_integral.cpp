#include "ontolab/path_integral.hpp"

#include "ontolab/rng.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace ontolab {

namespace {

std::vector<Eigen::VectorXd> classical_at_slices(const THooftSystem& sys,
                                                 const Eigen::VectorXd& q0,
                                                 double t0, double t1, int n_slices,
                                                 std::vector<double>* times_out) {
    std::vector<double> times(n_slices + 1);
    for (int j = 0; j <= n_slices; ++j)
        times[j] = t0 + (t1 - t0) * j / n_slices;

    IntegrateOptions opts;
    opts.checkpoints.assign(times.begin() + 1, times.end());
    opts.with_monodromy = true;
    const Trajectory traj =
        integrate(sys, q0, Eigen::VectorXd::Zero(sys.dim()), t1 - t0, opts);

    // Morse caveat: refuse windows where the linearized-flow determinant
    // degenerates or flips sign
    const double det = traj.monodromy.determinant();
    if (!(det > 0.0) || !std::isfinite(det))
        throw NumericalError(
            "sample_paths: monodromy determinant degenerates on the interval "
            "(focal point); shorten the time window");

    std::vector<Eigen::VectorXd> path;
    path.reserve(n_slices + 1);
    path.push_back(traj.q.front());
    for (int idx : traj.checkpoint_index) path.push_back(traj.q[idx]);
    if (static_cast<int>(path.size()) != n_slices + 1)
        throw NumericalError("sample_paths: classical path sampling failed");
    if (times_out) *times_out = times;
    return path;
}

} // namespace

DiscretizedPathEnsemble sample_paths(const THooftSystem& sys,
                                     const Eigen::VectorXd& q_start,
                                     const Eigen::VectorXd& q_end,
                                     const PathSamplingConfig& config) {
    const int n = sys.dim();
    if (q_start.size() != n || q_end.size() != n)
        throw ValidationError("sample_paths: endpoint dimension mismatch");
    if (config.sigma <= 0.0)
        throw ValidationError("sample_paths: sigma must be positive");
    if (config.sigma < 1e-8)
        throw ValidationError("sample_paths: sigma below the numerical floor 1e-8");
    if (config.n_slices < 2) throw ValidationError("sample_paths: need >= 2 slices");
    if (config.n_samples < 1) throw ValidationError("sample_paths: need >= 1 sample");
    if (!(config.t_end > config.t_start))
        throw ValidationError("sample_paths: need t_end > t_start");

    DiscretizedPathEnsemble ens;
    ens.config = config;
    ens.classical_path = classical_at_slices(sys, q_start, config.t_start, config.t_end,
                                             config.n_slices, &ens.slice_times);

    const double endpoint_gap = (ens.classical_path.back() - q_end).norm();
    if (endpoint_gap > 1e-6 * std::max(1.0, q_end.norm()))
        throw NumericalError(
            "sample_paths: no classical trajectory connects the endpoints "
            "(gap " + std::to_string(endpoint_gap) + "); adjust q_end or the window");

    const int ns = config.n_slices;
    const double total_t = config.t_end - config.t_start;
    const double dt = total_t / ns;
    const double sigma = config.sigma;
    const FlowField& flow = sys.flow;

    ens.samples.assign(config.n_samples, {});
    std::vector<double> log_weight(config.n_samples, 0.0);

    auto run_sample = [&](int k) {
        SplitMix64 rng = SplitMix64::derive(config.seed, static_cast<std::uint64_t>(k));
        // free Brownian bridge displacement around the classical path
        std::vector<Eigen::VectorXd> walk(ns + 1, Eigen::VectorXd::Zero(n));
        for (int j = 1; j <= ns; ++j) {
            walk[j] = walk[j - 1];
            for (int i = 0; i < n; ++i)
                walk[j][i] += sigma * std::sqrt(dt) * rng.normal();
        }
        std::vector<Eigen::VectorXd>& path = ens.samples[k];
        path.resize(ns + 1);
        double s_target = 0.0, s_free = 0.0;
        for (int j = 0; j <= ns; ++j) {
            const double frac = static_cast<double>(j) / ns;
            const Eigen::VectorXd u = walk[j] - frac * walk[ns];
            path[j] = ens.classical_path[j] + u;
        }
        Eigen::VectorXd fmid(n);
        for (int j = 0; j < ns; ++j) {
            const Eigen::VectorXd dq = path[j + 1] - path[j];
            flow.eval(0.5 * (path[j] + path[j + 1]), fmid);
            s_target += (dq - fmid * dt).squaredNorm();
            const Eigen::VectorXd du = (path[j + 1] - ens.classical_path[j + 1]) -
                                       (path[j] - ens.classical_path[j]);
            s_free += du.squaredNorm();
        }
        log_weight[k] = -(s_target - s_free) / (2.0 * sigma * sigma * dt);
    };

    const int threads = std::max(1, config.n_threads);
    if (threads == 1) {
        for (int k = 0; k < config.n_samples; ++k) run_sample(k);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (int k = next.fetch_add(1); k < config.n_samples;
                     k = next.fetch_add(1))
                    run_sample(k);
            });
        for (auto& th : pool) th.join();
    }

    // fixed-order normalization keeps the statistics byte-reproducible
    const double lw_max = *std::max_element(log_weight.begin(), log_weight.end());
    double total = 0.0;
    ens.weights.resize(config.n_samples);
    for (int k = 0; k < config.n_samples; ++k) {
        ens.weights[k] = std::exp(log_weight[k] - lw_max);
        total += ens.weights[k];
    }
    double sum_sq = 0.0;
    for (double& w : ens.weights) {
        w /= total;
        sum_sq += w * w;
    }
    ens.effective_sample_size = 1.0 / sum_sq;
    return ens;
}

MomentReport moments(const DiscretizedPathEnsemble& ens) {
    const int ns = ens.config.n_slices;
    const int n = static_cast<int>(ens.classical_path.front().size());
    MomentReport rep;
    rep.times = ens.slice_times;
    rep.classical = ens.classical_path;
    rep.effective_sample_size = ens.effective_sample_size;
    rep.mean.assign(ns + 1, Eigen::VectorXd::Zero(n));
    rep.sq_deviation.assign(ns + 1, 0.0);
    rep.covariance = Eigen::MatrixXd::Zero(ns + 1, ns + 1);

    for (size_t k = 0; k < ens.samples.size(); ++k) {
        const double w = ens.weights[k];
        for (int j = 0; j <= ns; ++j) {
            rep.mean[j] += w * ens.samples[k][j];
            const Eigen::VectorXd u = ens.samples[k][j] - ens.classical_path[j];
            rep.sq_deviation[j] += w * u.squaredNorm();
        }
        for (int j = 0; j <= ns; ++j) {
            const Eigen::VectorXd uj = ens.samples[k][j] - ens.classical_path[j];
            for (int l = j; l <= ns; ++l) {
                const Eigen::VectorXd ul = ens.samples[k][l] - ens.classical_path[l];
                rep.covariance(j, l) += w * uj.dot(ul);
            }
        }
    }
    rep.covariance = rep.covariance.selfadjointView<Eigen::Upper>();

    double acc = 0.0;
    for (int j = 1; j < ns; ++j) acc += rep.sq_deviation[j];
    rep.mean_sq_deviation = acc / std::max(1, ns - 1);
    for (int j = 0; j <= ns; ++j)
        rep.max_mean_deviation =
            std::max(rep.max_mean_deviation, (rep.mean[j] - rep.classical[j]).norm());
    return rep;
}

ConcentrationReport concentration_scan(const THooftSystem& sys,
                                       const Eigen::VectorXd& q_start,
                                       const Eigen::VectorXd& q_end,
                                       PathSamplingConfig config,
                                       const std::vector<double>& sigmas) {
    if (sigmas.size() < 2)
        throw ValidationError("concentration_scan: need at least two sigmas");
    ConcentrationReport rep;
    rep.sigmas = sigmas;
    for (double s : sigmas) {
        config.sigma = s;
        const auto ens = sample_paths(sys, q_start, q_end, config);
        rep.mean_sq_deviation.push_back(moments(ens).mean_sq_deviation);
    }
    // least-squares slope of log msd against log sigma
    const int m = static_cast<int>(sigmas.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < m; ++i) {
        const double x = std::log(rep.sigmas[i]);
        const double y = std::log(rep.mean_sq_deviation[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    rep.fitted_exponent = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return rep;
}

double banded_log_determinant(const THooftSystem& sys, const Eigen::VectorXd& q0,
                              double t_final, int n_slices) {
    if (n_slices < 1) throw ValidationError("banded_log_determinant: need slices");
    std::vector<double> times;
    const auto path = classical_at_slices(sys, q0, 0.0, t_final, n_slices, &times);
    const double dt = t_final / n_slices;
    const int n = sys.dim();

    // block-bidiagonal initial-value discretization of d/dt - Df with the
    // midpoint rule; the normalized determinant is the product of the
    // one-step transfer factors det(I + dt/2 A) / det(I - dt/2 A)
    double log_det = 0.0;
    Eigen::MatrixXd jac(n, n);
    for (int j = 0; j < n_slices; ++j) {
        sys.flow.jacobian(0.5 * (path[j] + path[j + 1]), jac);
        const Eigen::MatrixXd plus = Eigen::MatrixXd::Identity(n, n) + 0.5 * dt * jac;
        const Eigen::MatrixXd minus = Eigen::MatrixXd::Identity(n, n) - 0.5 * dt * jac;
        const Eigen::PartialPivLU<Eigen::MatrixXd> lu_p(plus), lu_m(minus);
        double lp = 0.0, lm = 0.0;
        for (int i = 0; i < n; ++i) {
            lp += std::log(std::abs(lu_p.matrixLU()(i, i)));
            lm += std::log(std::abs(lu_m.matrixLU()(i, i)));
        }
        log_det += lp - lm;
    }
    return log_det;
}

FluctuationDeterminant fluctuation_determinant(const THooftSystem& sys,
                                               const Trajectory& traj, int n_slices) {
    if (n_slices < 8 || n_slices % 2 != 0)
        throw ValidationError("fluctuation_determinant: n_slices must be even and >= 8");
    const Eigen::VectorXd q0 = traj.q.front();
    const double t_final = traj.t_final();

    FluctuationDeterminant det;
    det.n_slices = n_slices;
    det.log_delta_route_raw = banded_log_determinant(sys, q0, t_final, n_slices);
    det.log_delta_route_half = banded_log_determinant(sys, q0, t_final, n_slices / 2);
    // the midpoint scheme is second order; one Richardson step removes the
    // leading error
    det.log_delta_route =
        (4.0 * det.log_delta_route_raw - det.log_delta_route_half) / 3.0;

    // independent route: Liouville / Abel identity via composite Simpson
    const int quad = std::max(512, 2 * n_slices);
    std::vector<double> times(quad + 1);
    for (int j = 0; j <= quad; ++j) times[j] = t_final * j / quad;
    IntegrateOptions opts;
    opts.checkpoints.assign(times.begin() + 1, times.end());
    opts.with_monodromy = false;
    const Trajectory fine =
        integrate(sys, q0, Eigen::VectorXd::Zero(sys.dim()), t_final, opts);
    std::vector<Eigen::VectorXd> pts;
    pts.push_back(fine.q.front());
    for (int idx : fine.checkpoint_index) pts.push_back(fine.q[idx]);

    const int n = sys.dim();
    Eigen::MatrixXd jac(n, n);
    auto trace_at = [&](int j) {
        sys.flow.jacobian(pts[j], jac);
        return jac.trace();
    };
    double integral = 0.0;
    const double h = t_final / quad;
    for (int j = 0; j + 2 <= quad; j += 2)
        integral += (h / 3.0) * (trace_at(j) + 4.0 * trace_at(j + 1) + trace_at(j + 2));
    det.log_monodromy_route = integral;
    return det;
}

GhostCancellationReport ghost_cancellation_check(const THooftSystem& sys,
                                                 const Trajectory& traj, int n_slices) {
    GhostCancellationReport rep;
    const auto det = fluctuation_determinant(sys, traj, n_slices);
    rep.log_jacobian = det.log_delta_route;

    // fresh variational integration for the Jacobi-field determinant
    const Trajectory vtraj = integrate(sys, traj.q.front(),
                                       Eigen::VectorXd::Zero(sys.dim()), traj.t_final());
    const double d = vtraj.monodromy.determinant();
    if (!(d > 0.0))
        throw NumericalError("ghost_cancellation_check: non-positive monodromy determinant");
    rep.log_monodromy_det = std::log(d);
    rep.residual = std::abs(rep.log_jacobian - rep.log_monodromy_det);
    return rep;
}

} // namespace ontolab

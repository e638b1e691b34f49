#include "ontolab/ode.hpp"

#include <algorithm>
#include <cmath>

namespace ontolab {

namespace {

// Dormand-Prince 5(4) tableau
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// 4th-order embedded weights
constexpr double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695, e4 = 393.0 / 640,
                 e5 = -92097.0 / 339200, e6 = 187.0 / 2100, e7 = 1.0 / 40;

} // namespace

OdeSolution integrate_rk45(const OdeRhs& rhs, double t0, const Eigen::VectorXd& y0,
                           double t1, const OdeOptions& opts) {
    if (!(t1 > t0)) throw ValidationError("integrate_rk45: need t1 > t0");
    if (opts.rel_tol <= 0 || opts.abs_tol <= 0)
        throw ValidationError("integrate_rk45: tolerances must be positive");

    const int n = static_cast<int>(y0.size());
    OdeSolution sol;
    sol.samples.push_back({t0, y0});

    std::vector<double> checkpoints = opts.checkpoints;
    std::sort(checkpoints.begin(), checkpoints.end());
    size_t next_cp = 0;
    // checkpoint at (or before) t0 is the initial sample
    while (next_cp < checkpoints.size() && checkpoints[next_cp] <= t0 + 0.0) {
        sol.checkpoint_index.push_back(0);
        ++next_cp;
    }

    Eigen::VectorXd y = y0;
    Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
    Eigen::VectorXd ytmp(n), ynew(n), yerr(n);

    rhs(t0, y, k1);

    // initial step heuristic
    double scale0 = opts.abs_tol + opts.rel_tol * y.cwiseAbs().maxCoeff();
    double d0 = y.cwiseAbs().maxCoeff() / scale0;
    double d1 = k1.cwiseAbs().maxCoeff() / scale0;
    double h = (d0 > 1e-5 && d1 > 1e-5) ? 0.01 * d0 / d1 : 1e-6;
    h = std::min({h, (t1 - t0), opts.max_step});

    double t = t0;
    const double h_floor = 1e-14 * std::max(1.0, std::abs(t1 - t0));

    while (t < t1) {
        double target = t1;
        if (next_cp < checkpoints.size() && checkpoints[next_cp] < t1)
            target = checkpoints[next_cp];
        if (t + h >= target - h_floor) h = target - t;
        if (h < h_floor)
            throw NumericalError("integrate_rk45: step size underflow at t = " +
                                 std::to_string(t));

        ytmp = y + h * a21 * k1;
        rhs(t + c2 * h, ytmp, k2);
        ytmp = y + h * (a31 * k1 + a32 * k2);
        rhs(t + c3 * h, ytmp, k3);
        ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
        rhs(t + c4 * h, ytmp, k4);
        ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        rhs(t + c5 * h, ytmp, k5);
        ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        rhs(t + h, ytmp, k6);
        ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        rhs(t + h, ynew, k7);
        yerr = ynew - (y + h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7));

        double err = 0.0;
        for (int i = 0; i < n; ++i) {
            const double sk =
                opts.abs_tol + opts.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            const double r = yerr[i] / sk;
            err += r * r;
        }
        err = std::sqrt(err / n);

        if (err <= 1.0 || h <= 2 * h_floor) {
            t += h;
            y = ynew;
            k1 = k7; // FSAL
            sol.samples.push_back({t, y});
            ++sol.n_steps;
            while (next_cp < checkpoints.size() && checkpoints[next_cp] <= t + h_floor) {
                sol.checkpoint_index.push_back(static_cast<int>(sol.samples.size()) - 1);
                ++next_cp;
            }
        } else {
            ++sol.n_rejected;
        }

        double factor = 0.9 * std::pow(std::max(err, 1e-16), -0.2);
        factor = std::clamp(factor, 0.2, 5.0);
        h = std::min(h * factor, opts.max_step);
    }

    // t1 itself may be a checkpoint
    while (next_cp < checkpoints.size()) {
        sol.checkpoint_index.push_back(static_cast<int>(sol.samples.size()) - 1);
        ++next_cp;
    }
    return sol;
}

Eigen::VectorXd integrate_rk4(const OdeRhs& rhs, double t0, const Eigen::VectorXd& y0,
                              double t1, int n_steps) {
    if (n_steps < 1) throw ValidationError("integrate_rk4: need at least one step");
    const double h = (t1 - t0) / n_steps;
    Eigen::VectorXd y = y0;
    Eigen::VectorXd k1, k2, k3, k4, tmp;
    for (int i = 0; i < n_steps; ++i) {
        const double t = t0 + i * h;
        rhs(t, y, k1);
        tmp = y + 0.5 * h * k1;
        rhs(t + 0.5 * h, tmp, k2);
        tmp = y + 0.5 * h * k2;
        rhs(t + 0.5 * h, tmp, k3);
        tmp = y + h * k3;
        rhs(t + h, tmp, k4);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return y;
}

} // namespace ontolab

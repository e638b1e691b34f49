#include "ontolab/koopman.hpp"

#include "ontolab/ode.hpp"

#include <json.hpp>

#include <algorithm>
#include <sstream>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

namespace ontolab {

double GridDensity::cell_volume() const {
    double v = 1.0;
    for (int d = 0; d < dim(); ++d) v *= spacing(d);
    return v;
}

double GridDensity::mass() const {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc * cell_volume();
}

double GridDensity::l1_norm() const {
    double acc = 0.0;
    for (double v : values) acc += std::abs(v);
    return acc * cell_volume();
}

double GridDensity::l2_norm() const {
    double acc = 0.0;
    for (double v : values) acc += v * v;
    return std::sqrt(acc * cell_volume());
}

double GridDensity::l1_distance(const GridDensity& other) const {
    if (values.size() != other.values.size())
        throw ValidationError("l1_distance: grid shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
        acc += std::abs(values[i] - other.values[i]);
    return acc * cell_volume();
}

Eigen::VectorXd GridDensity::node(std::size_t flat) const {
    Eigen::VectorXd x(dim());
    for (int d = dim() - 1; d >= 0; --d) {
        const std::size_t r = resolution[d];
        x[d] = lo[d] + spacing(d) * static_cast<double>(flat % r);
        flat /= r;
    }
    return x;
}

bool GridDensity::inside(const Eigen::VectorXd& x) const {
    for (int d = 0; d < dim(); ++d)
        if (x[d] < lo[d] || x[d] > hi[d]) return false;
    return true;
}

double GridDensity::interpolate(const Eigen::VectorXd& x) const {
    const int nd = dim();
    std::vector<int> base(nd);
    std::vector<double> frac(nd);
    for (int d = 0; d < nd; ++d) {
        const double s = (x[d] - lo[d]) / spacing(d);
        int i = static_cast<int>(std::floor(s));
        i = std::clamp(i, 0, resolution[d] - 2);
        base[d] = i;
        frac[d] = std::clamp(s - i, 0.0, 1.0);
    }
    double acc = 0.0;
    const int corners = 1 << nd;
    for (int c = 0; c < corners; ++c) {
        double w = 1.0;
        std::size_t flat = 0;
        for (int d = 0; d < nd; ++d) {
            const int bit = (c >> d) & 1;
            w *= bit ? frac[d] : 1.0 - frac[d];
            flat = flat * resolution[d] + (base[d] + bit);
        }
        acc += w * values[flat];
    }
    return acc;
}

Eigen::VectorXd GridDensity::mean() const {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim());
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        acc += values[i] * node(i);
        total += values[i];
    }
    if (total <= 0.0) throw NumericalError("GridDensity::mean: empty density");
    return acc / total;
}

GridDensity GridDensity::zeros(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                               const std::vector<int>& resolution) {
    if (lo.size() != hi.size() ||
        lo.size() != static_cast<Eigen::Index>(resolution.size()))
        throw ValidationError("GridDensity: box/resolution shape mismatch");
    std::size_t total = 1;
    for (int r : resolution) {
        if (r < 2) throw ValidationError("GridDensity: resolution must be >= 2");
        total *= static_cast<std::size_t>(r);
    }
    GridDensity g;
    g.lo = lo;
    g.hi = hi;
    g.resolution = resolution;
    g.values.assign(total, 0.0);
    return g;
}

GridDensity GridDensity::gaussian(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                  const std::vector<int>& resolution,
                                  const Eigen::VectorXd& center, double width) {
    GridDensity g = zeros(lo, hi, resolution);
    for (std::size_t i = 0; i < g.values.size(); ++i) {
        const Eigen::VectorXd x = g.node(i);
        g.values[i] = std::exp(-(x - center).squaredNorm() / (2.0 * width * width));
    }
    const double m = g.mass();
    for (double& v : g.values) v /= m;
    return g;
}

std::string GridDensity::to_csv() const {
    nlohmann::json header;
    header["box_lo"] = std::vector<double>(lo.data(), lo.data() + lo.size());
    header["box_hi"] = std::vector<double>(hi.data(), hi.data() + hi.size());
    header["resolution"] = resolution;
    std::string out = header.dump() + "\nvalue\n";
    char buf[40];
    for (double v : values) {
        std::snprintf(buf, sizeof(buf), "%.17g\n", v);
        out += buf;
    }
    return out;
}

GridDensity GridDensity::from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw ValidationError("GridDensity::from_csv: empty input");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
        throw ValidationError(std::string("GridDensity::from_csv: bad header: ") +
                              e.what());
    }
    const auto lo_v = header.at("box_lo").get<std::vector<double>>();
    const auto hi_v = header.at("box_hi").get<std::vector<double>>();
    const auto res = header.at("resolution").get<std::vector<int>>();
    Eigen::VectorXd lo = Eigen::Map<const Eigen::VectorXd>(lo_v.data(), lo_v.size());
    Eigen::VectorXd hi = Eigen::Map<const Eigen::VectorXd>(hi_v.data(), hi_v.size());
    GridDensity g = zeros(lo, hi, res);

    if (!std::getline(in, line) || line != "value")
        throw ValidationError("GridDensity::from_csv: missing 'value' column header");
    std::size_t i = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (i >= g.values.size())
            throw ValidationError("GridDensity::from_csv: too many values");
        g.values[i++] = std::stod(line);
    }
    if (i != g.values.size())
        throw ValidationError("GridDensity::from_csv: expected " +
                              std::to_string(g.values.size()) + " values, got " +
                              std::to_string(i));
    return g;
}

PropagateResult propagate(const GridDensity& rho, const THooftSystem& sys, double t,
                          const PropagateOptions& opts) {
    if (rho.dim() != sys.dim())
        throw ValidationError("propagate: density dimension != system dimension");
    if (opts.n_steps < 1) throw ValidationError("propagate: n_steps must be >= 1");

    const FlowField& flow = sys.flow;
    OdeRhs backward = [&flow](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
        dy.resize(y.size());
        flow.eval(y, dy);
        dy = -dy;
    };

    const double dt = t / opts.n_steps;
    GridDensity current = rho;
    const double mass0 = rho.mass();
    std::atomic<long> exits{0};

    for (int step = 0; step < opts.n_steps; ++step) {
        GridDensity next = GridDensity::zeros(rho.lo, rho.hi, rho.resolution);

        auto process_range = [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                Eigen::VectorXd src = current.node(i);
                if (opts.n_steps == 1) {
                    OdeOptions oopts;
                    oopts.rel_tol = 1e-10;
                    oopts.abs_tol = 1e-12;
                    src = integrate_rk45(backward, 0.0, src, dt, oopts).samples.back().y;
                } else {
                    src = integrate_rk4(backward, 0.0, src, dt, 4);
                }
                if (!current.inside(src)) {
                    exits.fetch_add(1, std::memory_order_relaxed);
                    switch (opts.boundary) {
                        case BoundaryPolicy::Error:
                            next.values[i] = 0.0;
                            continue;
                        case BoundaryPolicy::ZeroOutside:
                            next.values[i] = 0.0;
                            continue;
                        case BoundaryPolicy::Periodic:
                            for (int d = 0; d < current.dim(); ++d) {
                                const double span = current.hi[d] - current.lo[d];
                                double s = std::fmod(src[d] - current.lo[d], span);
                                if (s < 0) s += span;
                                src[d] = current.lo[d] + s;
                            }
                            break;
                    }
                }
                next.values[i] = current.interpolate(src);
            }
        };

        const int threads = std::max(1, opts.n_threads);
        if (threads == 1) {
            process_range(0, next.values.size());
        } else {
            std::vector<std::thread> pool;
            const std::size_t chunk = (next.values.size() + threads - 1) / threads;
            for (int w = 0; w < threads; ++w) {
                const std::size_t b = w * chunk;
                const std::size_t e = std::min(next.values.size(), b + chunk);
                if (b < e) pool.emplace_back(process_range, b, e);
            }
            for (auto& th : pool) th.join();
        }
        current = std::move(next);
    }

    PropagateResult result;
    result.exit_fraction = static_cast<double>(exits.load()) /
                           (static_cast<double>(rho.values.size()) * opts.n_steps);
    if (opts.boundary == BoundaryPolicy::Error &&
        result.exit_fraction > opts.exit_tolerance)
        throw NumericalError(
            "propagate: characteristics exit the non-periodic box (exit fraction " +
            std::to_string(result.exit_fraction) + "); declare a boundary policy");
    result.mass_drift = std::abs(current.mass() - mass0) / std::max(1e-300, mass0);
    result.density = std::move(current);
    return result;
}

std::vector<double> koopman_orbit_phases(const THooftSystem& sys,
                                         const Eigen::VectorXd& q0, int n_max,
                                         double window) {
    if (n_max < 0) throw ValidationError("koopman_orbit_phases: n_max must be >= 0");
    const int n = sys.dim();
    // scale-free default window: long enough for several cycles of any
    // benchmark orbit
    if (window <= 0.0) window = 80.0;

    IntegrateOptions opts;
    opts.with_monodromy = false;
    const int n_out = 4000;
    for (int k = 1; k <= n_out; ++k) opts.checkpoints.push_back(window * k / n_out);
    const Trajectory traj = integrate(sys, q0, Eigen::VectorXd::Zero(n), window, opts);

    // oscillation cycles of the first coordinate around its window average
    std::vector<double> t_s, y_s;
    t_s.push_back(traj.times.front());
    y_s.push_back(traj.q.front()[0]);
    for (int idx : traj.checkpoint_index) {
        t_s.push_back(traj.times[idx]);
        y_s.push_back(traj.q[idx][0]);
    }
    double mean = 0.0;
    for (double y : y_s) mean += y;
    mean /= static_cast<double>(y_s.size());

    double amplitude = 0.0;
    for (double y : y_s) amplitude = std::max(amplitude, std::abs(y - mean));
    if (amplitude < 1e-12)
        throw NumericalError("koopman_orbit_phases: aperiodic orbit, observable is flat");

    // upward crossings of the mean level, Newton-refined through the flow
    const FlowField& flow = sys.flow;
    auto refine_crossing = [&](double t_guess) {
        double t = t_guess;
        for (int it = 0; it < 10; ++it) {
            // local state by short re-integration from the nearest sample
            Eigen::VectorXd q(n);
            {
                auto it_lo = std::upper_bound(t_s.begin(), t_s.end(), t);
                int k = static_cast<int>(it_lo - t_s.begin()) - 1;
                k = std::clamp(k, 0, static_cast<int>(t_s.size()) - 1);
                // walk the original trajectory samples: index into traj
                // (checkpoints are uniform, so map back)
                const double t0 = t_s[k];
                Eigen::VectorXd y0(n);
                if (k == 0) {
                    y0 = traj.q.front();
                } else {
                    y0 = traj.q[traj.checkpoint_index[k - 1]];
                }
                if (t > t0) {
                    OdeRhs fwd = [&flow](double, const Eigen::VectorXd& y,
                                         Eigen::VectorXd& dy) {
                        dy.resize(y.size());
                        flow.eval(y, dy);
                    };
                    OdeOptions o;
                    o.rel_tol = 1e-12;
                    o.abs_tol = 1e-14;
                    q = integrate_rk45(fwd, t0, y0, t, o).samples.back().y;
                } else {
                    q = y0;
                }
            }
            const double g = q[0] - mean;
            const double gp = flow(q)[0];
            if (gp == 0.0) break;
            const double step = g / gp;
            t -= step;
            if (std::abs(step) < 1e-13 * std::max(1.0, t)) break;
        }
        return t;
    };

    std::vector<double> crossings;
    for (size_t k = 1; k < y_s.size(); ++k) {
        if (y_s[k - 1] < mean && y_s[k] >= mean) {
            const double frac = (mean - y_s[k - 1]) / (y_s[k] - y_s[k - 1]);
            crossings.push_back(
                refine_crossing(t_s[k - 1] + frac * (t_s[k] - t_s[k - 1])));
        }
    }
    if (crossings.size() < 3)
        throw NumericalError(
            "koopman_orbit_phases: fewer than three oscillation cycles in the window; "
            "aperiodic orbit or window too short");

    const double cycles = static_cast<double>(crossings.size() - 1);
    const double omega0 =
        2.0 * std::numbers::pi * cycles / (crossings.back() - crossings.front());

    std::vector<double> phases;
    phases.reserve(n_max + 1);
    for (int k = 0; k <= n_max; ++k) phases.push_back(k * omega0);
    return phases;
}

} // namespace ontolab

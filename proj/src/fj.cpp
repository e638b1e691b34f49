#include "ontolab/fj.hpp"

#include "ontolab/ode.hpp" // NumericalError / ValidationError
#include "ontolab/rng.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace ontolab {

namespace {

void check_antisymmetric(const Eigen::MatrixXd& f, double rel_tol, const char* where) {
    if (f.rows() != f.cols()) throw ValidationError(std::string(where) + ": matrix not square");
    const double scale = std::max(1.0, f.cwiseAbs().maxCoeff());
    if ((f + f.transpose()).cwiseAbs().maxCoeff() > rel_tol * scale)
        throw ValidationError(std::string(where) + ": matrix is not antisymmetric");
}

std::string matrix_to_string(const Eigen::MatrixXd& m) {
    std::ostringstream out;
    out << "[";
    for (int i = 0; i < m.rows(); ++i) {
        out << (i ? "; " : "");
        for (int j = 0; j < m.cols(); ++j) out << (j ? ", " : "") << m(i, j);
    }
    out << "]";
    return out.str();
}

} // namespace

Eigen::MatrixXd RationalMatrix::eval(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd out(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out(i, j) = at(i, j).eval(x);
    return out;
}

bool RationalMatrix::is_constant() const {
    for (const auto& e : entries)
        if (!(e.is_polynomial() && e.num().is_constant())) return false;
    return true;
}

Eigen::MatrixXd RationalMatrix::constant_value() const {
    Eigen::MatrixXd out(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            out(i, j) = at(i, j).num().constant_value() /
                        at(i, j).den().constant_value();
    return out;
}

RationalMatrix RationalMatrix::without(int var) const {
    RationalMatrix out;
    out.n = n - 1;
    out.entries.reserve(out.n * out.n);
    for (int i = 0; i < n; ++i) {
        if (i == var) continue;
        for (int j = 0; j < n; ++j) {
            if (j == var) continue;
            if (at(i, j).depends_on(var))
                throw ValidationError(
                    "RationalMatrix::without: entries still depend on the variable");
            out.entries.push_back(at(i, j).drop_var(var));
        }
    }
    return out;
}

Eigen::MatrixXd symplectic_omega(int n_pairs) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2 * n_pairs, 2 * n_pairs);
    for (int a = 0; a < n_pairs; ++a) {
        w(a, n_pairs + a) = 1.0;
        w(n_pairs + a, a) = -1.0;
    }
    return w;
}

FirstOrderLagrangian::FirstOrderLagrangian(std::vector<std::string> names,
                                           KineticMatrix kinetic, Rational potential)
    : names_(std::move(names)), kinetic_(std::move(kinetic)),
      potential_(std::move(potential)) {
    const int m = dim();
    if (potential_.nvars() != m)
        throw ValidationError("FirstOrderLagrangian: potential variable count mismatch");
    if (std::holds_alternative<Eigen::MatrixXd>(kinetic_)) {
        const auto& k = std::get<Eigen::MatrixXd>(kinetic_);
        if (k.rows() != m)
            throw ValidationError("FirstOrderLagrangian: kinetic matrix size mismatch");
        check_antisymmetric(k, 1e-12, "FirstOrderLagrangian");
    } else {
        if (std::get<RationalMatrix>(kinetic_).n != m)
            throw ValidationError("FirstOrderLagrangian: kinetic matrix size mismatch");
    }
}

FirstOrderLagrangian FirstOrderLagrangian::canonical(int n_pairs, Rational hamiltonian) {
    std::vector<std::string> names;
    for (int a = 1; a <= n_pairs; ++a) names.push_back("p" + std::to_string(a));
    for (int a = 1; a <= n_pairs; ++a) names.push_back("q" + std::to_string(a));
    return FirstOrderLagrangian(std::move(names), symplectic_omega(n_pairs),
                                std::move(hamiltonian));
}

void FirstOrderLagrangian::add_multiplier(const Rational& constraint,
                                          const std::string& label) {
    const int m = dim();
    if (constraint.nvars() != m)
        throw ValidationError("add_multiplier: constraint variable count mismatch");

    std::vector<int> id(m);
    for (int i = 0; i < m; ++i) id[i] = i;

    potential_ = potential_.remap(m + 1, id) +
                 Rational::variable(m + 1, m) * constraint.remap(m + 1, id);

    if (std::holds_alternative<Eigen::MatrixXd>(kinetic_)) {
        Eigen::MatrixXd k = Eigen::MatrixXd::Zero(m + 1, m + 1);
        k.topLeftCorner(m, m) = std::get<Eigen::MatrixXd>(kinetic_);
        kinetic_ = k;
    } else {
        const auto& rm = std::get<RationalMatrix>(kinetic_);
        RationalMatrix bigger;
        bigger.n = m + 1;
        bigger.entries.assign((m + 1) * (m + 1), Rational::constant(m + 1, 0.0));
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) bigger.at(i, j) = rm.at(i, j).remap(m + 1, id);
        kinetic_ = std::move(bigger);
    }
    names_.push_back(label);
    multiplier_indices_.push_back(m);
    if (reference_) {
        Eigen::VectorXd r(m + 1);
        r.head(m) = *reference_;
        r[m] = 0.0;
        reference_ = r;
    }
}

bool FirstOrderLagrangian::kinetic_is_constant() const {
    return std::holds_alternative<Eigen::MatrixXd>(kinetic_) ||
           std::get<RationalMatrix>(kinetic_).is_constant();
}

Eigen::MatrixXd FirstOrderLagrangian::kinetic_at(const Eigen::VectorXd& x) const {
    if (std::holds_alternative<Eigen::MatrixXd>(kinetic_))
        return std::get<Eigen::MatrixXd>(kinetic_);
    return std::get<RationalMatrix>(kinetic_).eval(x);
}

Eigen::VectorXd FirstOrderLagrangian::potential_gradient(const Eigen::VectorXd& x) const {
    return potential_.gradient(x);
}

Eigen::VectorXd FirstOrderLagrangian::eom_rhs(const Eigen::VectorXd& x) const {
    const Eigen::MatrixXd f = kinetic_at(x);
    const Eigen::VectorXd g = potential_gradient(x);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(f);
    if (lu.isInvertible()) return lu.solve(g);
    // minimum-norm solution; the kernel component is pure gauge
    return f.completeOrthogonalDecomposition().solve(g);
}

ZeroModeBasis zero_modes(const Eigen::MatrixXd& f, double tol) {
    check_antisymmetric(f, 1e-12, "zero_modes");
    const int m = static_cast<int>(f.rows());
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(f, Eigen::ComputeFullV);

    ZeroModeBasis basis;
    basis.singular_values = svd.singularValues();
    basis.tolerance = tol;
    const double sigma_max = m > 0 ? basis.singular_values[0] : 0.0;
    int rank = 0;
    for (int i = 0; i < basis.singular_values.size(); ++i)
        if (basis.singular_values[i] > tol * sigma_max && basis.singular_values[i] > 0.0)
            ++rank;
    basis.rank = rank;
    basis.modes = svd.matrixV().rightCols(m - rank);
    return basis;
}

SkewNormalForm skew_normal_form(const Eigen::MatrixXd& f, double tol) {
    check_antisymmetric(f, 1e-12, "skew_normal_form");
    const int m = static_cast<int>(f.rows());

    const Eigen::MatrixXd gram = f.transpose() * f;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    if (es.info() != Eigen::Success)
        throw NumericalError("skew_normal_form: eigensolver failed");

    const double sigma_max = std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
    const double sigma_cut = std::max(tol * sigma_max, 1e-300);

    struct Pair {
        Eigen::VectorXd w, u;
        double a;
    };
    std::vector<Pair> pairs;
    std::vector<Eigen::VectorXd> kernel;

    // cluster eigen-directions by singular value, largest first
    std::vector<int> order(m);
    for (int i = 0; i < m; ++i) order[i] = m - 1 - i; // eigenvalues come ascending
    int pos = 0;
    while (pos < m) {
        const double lambda = es.eigenvalues()[order[pos]];
        const double sigma = std::sqrt(std::max(0.0, lambda));
        if (sigma <= sigma_cut) {
            for (; pos < m; ++pos) kernel.push_back(es.eigenvectors().col(order[pos]));
            break;
        }
        // gather the cluster of (numerically) equal singular values
        Eigen::MatrixXd proj = Eigen::MatrixXd::Zero(m, m);
        int count = 0;
        while (pos < m) {
            const double s = std::sqrt(std::max(0.0, es.eigenvalues()[order[pos]]));
            if (std::abs(s - sigma) > 1e-9 * std::max(sigma_max, 1.0) || s <= sigma_cut)
                break;
            const Eigen::VectorXd v = es.eigenvectors().col(order[pos]);
            proj += v * v.transpose();
            ++count;
            ++pos;
        }
        if (count % 2 != 0)
            throw NumericalError(
                "skew_normal_form: odd cluster multiplicity, singular-value pairing failed");

        for (int pair = 0; pair < count / 2; ++pair) {
            // seed direction: basis vector with the largest remaining projection,
            // later indices win ties (keeps canonical inputs canonical)
            int k_best = 0;
            double best = -1.0;
            for (int k = 0; k < m; ++k)
                if (proj(k, k) >= best - 1e-12) {
                    best = std::max(best, proj(k, k));
                    k_best = k;
                }
            Eigen::VectorXd u = proj.col(k_best);
            const double nu = u.norm();
            if (nu < 1e-12)
                throw NumericalError("skew_normal_form: degenerate projector");
            u /= nu;
            Eigen::VectorXd w = f * u;
            const double a = w.norm();
            w /= a;
            // guard against drift out of the cluster subspace
            w = (proj * w).eval();
            w /= w.norm();
            pairs.push_back({w, u, a});
            proj -= u * u.transpose() + w * w.transpose();
        }
    }

    // deterministic pair order: by the dominant component of the p-like vector
    auto argmax_abs = [](const Eigen::VectorXd& v) {
        int idx = 0;
        v.cwiseAbs().maxCoeff(&idx);
        return idx;
    };
    std::stable_sort(pairs.begin(), pairs.end(), [&](const Pair& a, const Pair& b) {
        const int ia = argmax_abs(a.w), ib = argmax_abs(b.w);
        if (ia != ib) return ia < ib;
        return argmax_abs(a.u) < argmax_abs(b.u);
    });

    const int r = 2 * static_cast<int>(pairs.size());
    SkewNormalForm nf;
    nf.rank = r;
    nf.transform.resize(m, m);
    nf.inverse.resize(m, m);
    for (size_t i = 0; i < pairs.size(); ++i) {
        const double s = std::sqrt(pairs[i].a);
        nf.transform.col(static_cast<int>(i)) = pairs[i].w / s;
        nf.transform.col(static_cast<int>(pairs.size() + i)) = pairs[i].u / s;
        nf.inverse.row(static_cast<int>(i)) = s * pairs[i].w.transpose();
        nf.inverse.row(static_cast<int>(pairs.size() + i)) = s * pairs[i].u.transpose();
    }
    for (size_t i = 0; i < kernel.size(); ++i) {
        nf.transform.col(r + static_cast<int>(i)) = kernel[i];
        nf.inverse.row(r + static_cast<int>(i)) = kernel[i].transpose();
    }

    Eigen::MatrixXd target = Eigen::MatrixXd::Zero(m, m);
    target.topLeftCorner(r, r) = symplectic_omega(r / 2);
    nf.residual = (nf.transform.transpose() * f * nf.transform - target)
                      .cwiseAbs()
                      .maxCoeff();
    if (nf.residual > 1e-9 * std::max(1.0, f.cwiseAbs().maxCoeff()))
        throw NumericalError("skew_normal_form: residual " + std::to_string(nf.residual));
    return nf;
}

Eigen::MatrixXd darboux(const Eigen::MatrixXd& f) {
    const int m = static_cast<int>(f.rows());
    if (m % 2 != 0)
        throw NumericalError("darboux: odd dimension, matrix is singular; "
                             "strip zero modes first");
    if ((f - symplectic_omega(m / 2)).cwiseAbs().maxCoeff() == 0.0)
        return Eigen::MatrixXd::Identity(m, m);
    const auto nf = skew_normal_form(f);
    if (nf.rank < m)
        throw NumericalError("darboux: singular matrix; strip zero modes first");
    if (nf.residual > 1e-10 * std::max(1.0, f.cwiseAbs().maxCoeff()))
        throw NumericalError("darboux: residual above tolerance");
    return nf.transform;
}

std::string to_string(EliminationStep::Kind kind) {
    switch (kind) {
        case EliminationStep::Kind::MultiplierConstraint: return "constraint";
        case EliminationStep::Kind::SolvedVariable: return "solved";
        case EliminationStep::Kind::DroppedDecoupled: return "dropped";
        case EliminationStep::Kind::GaugeDirection: return "gauge";
        case EliminationStep::Kind::LinearChange: return "darboux";
        case EliminationStep::Kind::Stuck: return "stuck";
    }
    return "?";
}

FirstOrderLagrangian eliminate_coordinate(const FirstOrderLagrangian& lagr, int index,
                                          const Rational& constraint,
                                          EliminationStep* step) {
    const int m = lagr.dim();
    if (index < 0 || index >= m)
        throw ValidationError("eliminate_coordinate: variable index out of range");
    if (!std::holds_alternative<Eigen::MatrixXd>(lagr.kinetic()))
        throw ValidationError(
            "eliminate_coordinate: supported for constant kinetic matrices only");
    if (constraint.nvars() != m)
        throw ValidationError("eliminate_coordinate: constraint variable count mismatch");
    if (constraint.den().depends_on(index))
        throw ValidationError(
            "eliminate_coordinate: constraint denominator involves the variable");
    if (constraint.num().degree_in(index) != 1)
        throw ValidationError("eliminate_coordinate: constraint is not affine in " +
                              lagr.names()[index] +
                              "; use the multiplier route or supply a root form");

    const auto coeffs = constraint.num().coefficients_in(index);
    const Polynomial& a = coeffs[1];
    const Polynomial& b = coeffs[0];
    if (!a.is_constant()) {
        if (!lagr.reference_point())
            throw ValidationError(
                "eliminate_coordinate: non-constant solve coefficient needs a reference "
                "point to validate the local chart");
        const double av = a.eval(*lagr.reference_point());
        if (std::abs(av) < 1e-10 * std::max(1.0, a.coeff_scale()))
            throw NumericalError(
                "eliminate_coordinate: solve coefficient vanishes at the reference point; "
                "choose a different variable or reference");
    }
    const Rational solution = Rational(-b, a).simplified(); // still in m variables

    // index bookkeeping for the reduced space
    std::vector<int> kept;
    for (int i = 0; i < m; ++i)
        if (i != index) kept.push_back(i);

    const Rational g = solution.drop_var(index);
    std::vector<Rational> dg;
    dg.reserve(m - 1);
    for (int j = 0; j < m - 1; ++j) dg.push_back(g.partial(j).simplified());

    bool all_const = true;
    for (const auto& d : dg)
        all_const = all_const && d.is_polynomial() && d.num().is_constant();

    const Eigen::MatrixXd& k = std::get<Eigen::MatrixXd>(lagr.kinetic());
    KineticMatrix new_kinetic;
    if (all_const) {
        Eigen::MatrixXd f(m - 1, m - 1);
        for (int i = 0; i < m - 1; ++i) {
            for (int j = 0; j < m - 1; ++j) {
                double corr = 0.0;
                if (k(index, kept[i]) != 0.0)
                    corr += k(index, kept[i]) * dg[j].num().constant_value() /
                            dg[j].den().constant_value();
                if (k(index, kept[j]) != 0.0)
                    corr -= k(index, kept[j]) * dg[i].num().constant_value() /
                            dg[i].den().constant_value();
                f(i, j) = k(kept[i], kept[j]) - corr;
            }
        }
        check_antisymmetric(f, 1e-12, "eliminate_coordinate");
        new_kinetic = f;
    } else {
        RationalMatrix f;
        f.n = m - 1;
        f.entries.assign((m - 1) * (m - 1), Rational::constant(m - 1, 0.0));
        for (int i = 0; i < m - 1; ++i) {
            for (int j = 0; j < m - 1; ++j) {
                Rational entry = Rational::constant(m - 1, k(kept[i], kept[j]));
                if (k(index, kept[i]) != 0.0)
                    entry = entry - dg[j] * k(index, kept[i]);
                if (k(index, kept[j]) != 0.0)
                    entry = entry + dg[i] * k(index, kept[j]);
                f.at(i, j) = entry.simplified();
            }
        }
        // antisymmetry spot check at the reference point
        if (lagr.reference_point()) {
            Eigen::VectorXd ref(m - 1);
            for (int i = 0; i < m - 1; ++i) ref[i] = (*lagr.reference_point())[kept[i]];
            const Eigen::MatrixXd fe = f.eval(ref);
            check_antisymmetric(fe, 1e-12, "eliminate_coordinate (sampled)");
        }
        new_kinetic = std::move(f);
    }

    Rational new_potential = lagr.potential().substitute_var(index, solution);

    std::vector<std::string> names;
    for (int i : kept) names.push_back(lagr.names()[i]);

    FirstOrderLagrangian out(std::move(names), std::move(new_kinetic),
                             std::move(new_potential));
    if (lagr.reference_point()) {
        Eigen::VectorXd ref(m - 1);
        for (int i = 0; i < m - 1; ++i) ref[i] = (*lagr.reference_point())[kept[i]];
        out.set_reference_point(ref);
    }
    if (step) {
        step->kind = EliminationStep::Kind::SolvedVariable;
        step->variable = lagr.names()[index];
        std::vector<std::string> reduced_names;
        for (int i : kept) reduced_names.push_back(lagr.names()[i]);
        step->detail = lagr.names()[index] + " = " + g.to_string(reduced_names);
        step->solved_expression = g;
    }
    return out;
}

namespace {

// variable deletion when neither kinetic term nor potential involves it
FirstOrderLagrangian remove_variable(const FirstOrderLagrangian& lagr, int k) {
    const int m = lagr.dim();
    if (lagr.potential().depends_on(k))
        throw ValidationError("remove_variable: potential still depends on variable");

    KineticMatrix kin;
    if (std::holds_alternative<Eigen::MatrixXd>(lagr.kinetic())) {
        const auto& f = std::get<Eigen::MatrixXd>(lagr.kinetic());
        Eigen::MatrixXd g(m - 1, m - 1);
        for (int i = 0, ii = 0; i < m; ++i) {
            if (i == k) continue;
            for (int j = 0, jj = 0; j < m; ++j) {
                if (j == k) continue;
                g(ii, jj++) = f(i, j);
            }
            ++ii;
        }
        kin = g;
    } else {
        kin = std::get<RationalMatrix>(lagr.kinetic()).without(k);
    }

    std::vector<std::string> names;
    for (int i = 0; i < m; ++i)
        if (i != k) names.push_back(lagr.names()[i]);

    FirstOrderLagrangian out(std::move(names), std::move(kin),
                             lagr.potential().drop_var(k));
    if (lagr.reference_point()) {
        Eigen::VectorXd ref(m - 1);
        for (int i = 0, j = 0; i < m; ++i)
            if (i != k) ref[j++] = (*lagr.reference_point())[i];
        out.set_reference_point(ref);
    }
    return out;
}

FirstOrderLagrangian apply_linear_change(const FirstOrderLagrangian& lagr,
                                         const SkewNormalForm& nf,
                                         const Eigen::MatrixXd& snapped_kinetic) {
    const int m = lagr.dim();
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m);
    Rational new_potential = lagr.potential().substitute_linear(nf.transform, zero);
    std::vector<std::string> names;
    for (int i = 1; i <= m; ++i) names.push_back("u" + std::to_string(i));
    FirstOrderLagrangian out(std::move(names), snapped_kinetic, std::move(new_potential));
    if (lagr.reference_point())
        out.set_reference_point(nf.inverse * (*lagr.reference_point()));
    return out;
}

std::vector<int> zero_kinetic_rows(const Eigen::MatrixXd& f) {
    std::vector<int> rows;
    const double scale = std::max(1.0, f.cwiseAbs().maxCoeff());
    for (int i = 0; i < f.rows(); ++i)
        if (f.row(i).cwiseAbs().maxCoeff() <= 1e-13 * scale) rows.push_back(i);
    return rows;
}

bool field_is_zero(const Rational& r, double tol, double scale) {
    return r.num().is_zero(tol * std::max(1.0, scale));
}

// lowest-index variable the constraint is affine in; constant coefficients
// win over coordinate-dependent ones
int pick_solvable_variable(const Rational& phi, const FirstOrderLagrangian& lagr,
                           const std::optional<int>& forced) {
    const int m = phi.nvars();
    auto solvable = [&](int v, bool need_const) {
        if (phi.den().depends_on(v)) return false;
        if (phi.num().degree_in(v) != 1) return false;
        const Polynomial a = phi.num().coefficients_in(v)[1];
        if (need_const) return a.is_constant();
        if (a.is_constant()) return true;
        if (!lagr.reference_point()) return false;
        return std::abs(a.eval(*lagr.reference_point())) >
               1e-10 * std::max(1.0, a.coeff_scale());
    };
    if (forced && *forced >= 0 && *forced < m && solvable(*forced, false))
        return *forced;
    for (int v = 0; v < m; ++v)
        if (solvable(v, true)) return v;
    for (int v = 0; v < m; ++v)
        if (solvable(v, false)) return v;
    return -1;
}

} // namespace

ReducedSystem fj_reduce(const FirstOrderLagrangian& lagr, const FjOptions& opts) {
    ReducedSystem result{lagr, 0, false, {}, {}};
    FirstOrderLagrangian& cur = result.system;
    bool first_target_pending = opts.first_target.has_value();

    auto log = [&](EliminationStep::Kind kind, std::string var, std::string detail) {
        result.elimination_log.push_back({kind, std::move(var), std::move(detail), {}});
    };
    auto give_up = [&](const std::string& why) -> ReducedSystem& {
        result.stuck = true;
        log(EliminationStep::Kind::Stuck, "", why);
        return result;
    };

    for (int round = 0; round < opts.max_rounds; ++round) {
        // ----- constant kinetic matrix: the symbolic loop -----
        if (cur.kinetic_is_constant()) {
            if (!std::holds_alternative<Eigen::MatrixXd>(cur.kinetic())) {
                // collapse a constant rational matrix to numbers
                const auto ref = cur.reference_point();
                cur = FirstOrderLagrangian(
                    cur.names(),
                    std::get<RationalMatrix>(cur.kinetic()).constant_value(),
                    cur.potential());
                if (ref) cur.set_reference_point(*ref);
            }
            Eigen::MatrixXd k = std::get<Eigen::MatrixXd>(cur.kinetic());
            const int m = cur.dim();
            const auto nf = skew_normal_form(k, opts.svd_tol);

            Eigen::MatrixXd target = Eigen::MatrixXd::Zero(m, m);
            target.topLeftCorner(nf.rank, nf.rank) = symplectic_omega(nf.rank / 2);

            const double scale = std::max(1.0, k.cwiseAbs().maxCoeff());
            if ((k - target).cwiseAbs().maxCoeff() > 1e-12 * scale) {
                const auto ref_before = cur.reference_point();
                cur = apply_linear_change(cur, nf, target);
                log(EliminationStep::Kind::LinearChange, "",
                    "T = " + matrix_to_string(nf.transform) +
                        (ref_before ? "" : " (no reference point)"));
                k = target;
            }

            if (nf.rank == m) {
                result.canonical_dim = m;
                return result;
            }

            // z variables: identically zero kinetic rows
            bool acted = true;
            while (acted && cur.kinetic_is_constant()) {
                acted = false;
                const Eigen::MatrixXd& kin = std::get<Eigen::MatrixXd>(cur.kinetic());
                const std::vector<int> zrows = zero_kinetic_rows(kin);
                if (zrows.empty()) break;
                const double vscale = cur.potential().num().coeff_scale();

                bool any_unsolved_quadratic = false;
                for (int zi : zrows) {
                    const Rational phi = cur.potential().partial(zi).simplified();
                    if (field_is_zero(phi, opts.zero_tol, vscale)) {
                        const std::string name = cur.names()[zi];
                        cur = remove_variable(cur, zi);
                        log(EliminationStep::Kind::GaugeDirection, name,
                            "potential independent of velocity-free variable");
                        acted = true;
                        break;
                    }
                    if (phi.num().degree_in(zi) >= 1) {
                        if (phi.num().degree_in(zi) == 1 &&
                            !phi.den().depends_on(zi)) {
                            EliminationStep step;
                            cur = eliminate_coordinate(cur, zi, phi, &step);
                            result.elimination_log.push_back(step);
                            acted = true;
                            break;
                        }
                        any_unsolved_quadratic = true;
                        continue;
                    }
                    // constraint on the other variables, zi is its multiplier
                    result.constraints.push_back(phi);
                    {
                        std::vector<std::string> names = cur.names();
                        log(EliminationStep::Kind::MultiplierConstraint, cur.names()[zi],
                            "0 = " + phi.to_string(names));
                    }
                    std::optional<int> forced;
                    if (first_target_pending) {
                        forced = opts.first_target;
                        first_target_pending = false;
                    }
                    const int tgt = pick_solvable_variable(phi, cur, forced);
                    if (tgt < 0)
                        return give_up("constraint not affine in any variable: 0 = " +
                                       phi.to_string(cur.names()));
                    EliminationStep step;
                    cur = eliminate_coordinate(cur, tgt, phi, &step);
                    result.elimination_log.push_back(step);
                    acted = true;
                    break;
                }
                if (!acted && any_unsolved_quadratic)
                    return give_up(
                        "zero-mode equation is nonlinear in its own variable; outside "
                        "the supported class");
            }
            continue; // re-examine the (possibly rational) kinetic matrix
        }

        // ----- coordinate-dependent kinetic matrix: numeric termination -----
        // first drop variables that decoupled entirely (kinetic row and
        // potential dependence both identically zero)
        {
            bool dropped = true;
            while (dropped) {
                dropped = false;
                const auto& mat = std::get<RationalMatrix>(cur.kinetic());
                for (int v = 0; v < cur.dim(); ++v) {
                    bool zero_row = true;
                    for (int j = 0; j < mat.n && zero_row; ++j)
                        zero_row = mat.at(v, j).is_zero(1e-14) && mat.at(j, v).is_zero(1e-14);
                    if (zero_row && !cur.potential().depends_on(v)) {
                        try {
                            const std::string name = cur.names()[v];
                            cur = remove_variable(cur, v);
                            log(EliminationStep::Kind::DroppedDecoupled, name,
                                "variable absent from kinetic term and potential");
                            dropped = true;
                            break;
                        } catch (const ValidationError&) {
                            // other entries still involve the variable; keep it
                        }
                    }
                }
                if (!std::holds_alternative<RationalMatrix>(cur.kinetic())) break;
            }
        }
        if (!std::holds_alternative<RationalMatrix>(cur.kinetic())) continue;
        const auto& rm = std::get<RationalMatrix>(cur.kinetic());
        if (!cur.reference_point())
            return give_up("coordinate-dependent kinetic matrix needs a reference point");
        const Eigen::VectorXd x0 = *cur.reference_point();

        Eigen::MatrixXd f0;
        try {
            f0 = rm.eval(x0);
        } catch (const std::domain_error&) {
            return give_up("kinetic matrix singular at the reference point");
        }
        check_antisymmetric(f0, 1e-10, "fj_reduce");
        const auto modes0 = zero_modes(f0, opts.svd_tol);
        if (modes0.rank % 2 != 0)
            return give_up("odd numerical rank of the kinetic matrix");
        if (modes0.count() == 0) {
            result.canonical_dim = modes0.rank;
            return result;
        }

        // every kernel direction must annihilate grad V on a sample cloud,
        // otherwise a genuine constraint is hiding outside the symbolic class
        SplitMix64 rng(0xFE11CE5ULL);
        int valid = 0;
        double worst = 0.0;
        for (int s = 0; s < 4 * opts.gauge_samples && valid < opts.gauge_samples; ++s) {
            Eigen::VectorXd x = x0;
            if (s > 0)
                for (int i = 0; i < x.size(); ++i)
                    x[i] += 0.05 * (1.0 + std::abs(x[i])) * (2 * rng.uniform() - 1);
            try {
                const Eigen::MatrixXd fs = rm.eval(x);
                const auto modes = zero_modes(fs, opts.svd_tol);
                if (modes.rank != modes0.rank)
                    return give_up("kinetic rank varies across the sample cloud");
                const Eigen::VectorXd g = cur.potential_gradient(x);
                const double resid =
                    (modes.modes.transpose() * g).norm() / (1.0 + g.norm());
                worst = std::max(worst, resid);
                ++valid;
            } catch (const std::domain_error&) {
                continue; // sample fell on a pole of the chart, try another
            }
        }
        if (valid < std::max(2, opts.gauge_samples / 2))
            return give_up("could not sample the chart around the reference point");
        if (worst > opts.gauge_tol)
            return give_up("zero mode carries a residual constraint (|v.grad V| = " +
                           std::to_string(worst) + "); outside the supported class");

        for (int j = 0; j < modes0.count(); ++j) {
            std::ostringstream detail;
            detail << "kernel direction at reference point: [";
            for (int i = 0; i < modes0.modes.rows(); ++i)
                detail << (i ? ", " : "") << modes0.modes(i, j);
            detail << "], |v.grad V| <= " << worst;
            log(EliminationStep::Kind::GaugeDirection, "", detail.str());
        }
        result.canonical_dim = modes0.rank;
        return result;
    }
    return give_up("max_rounds exceeded");
}

} // namespace ontolab

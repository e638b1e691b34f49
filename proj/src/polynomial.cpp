#include "ontolab/polynomial.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace ontolab {

namespace {

void require_same_space(int a, int b, const char* op) {
    if (a != b)
        throw std::invalid_argument(std::string("polynomial ") + op +
                                    ": variable counts differ");
}

std::string format_coeff(double c) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", c);
    return buf;
}

} // namespace

Polynomial Polynomial::constant(int nvars, double c) {
    Polynomial p(nvars);
    if (c != 0.0) p.terms_[Exponents(nvars, 0)] = c;
    return p;
}

Polynomial Polynomial::variable(int nvars, int index) {
    Exponents e(nvars, 0);
    e.at(index) = 1;
    return monomial(nvars, std::move(e), 1.0);
}

Polynomial Polynomial::monomial(int nvars, Exponents exps, double coeff) {
    if (static_cast<int>(exps.size()) != nvars)
        throw std::invalid_argument("monomial: exponent vector size mismatch");
    Polynomial p(nvars);
    if (coeff != 0.0) p.terms_[std::move(exps)] = coeff;
    return p;
}

double Polynomial::coeff_scale() const {
    double s = 0.0;
    for (const auto& [e, c] : terms_) s = std::max(s, std::abs(c));
    return s;
}

bool Polynomial::is_zero(double tol) const {
    for (const auto& [e, c] : terms_)
        if (std::abs(c) > tol) return false;
    return true;
}

bool Polynomial::is_constant() const {
    for (const auto& [e, c] : terms_)
        for (int k : e)
            if (k != 0) return false;
    return true;
}

double Polynomial::constant_value() const {
    auto it = terms_.find(Exponents(nvars_, 0));
    return it == terms_.end() ? 0.0 : it->second;
}

int Polynomial::total_degree() const {
    int d = 0;
    for (const auto& [e, c] : terms_) {
        int t = 0;
        for (int k : e) t += k;
        d = std::max(d, t);
    }
    return d;
}

int Polynomial::degree_in(int var) const {
    int d = 0;
    for (const auto& [e, c] : terms_) d = std::max(d, e.at(var));
    return d;
}

double Polynomial::eval(const Eigen::VectorXd& x) const {
    if (x.size() != nvars_)
        throw std::invalid_argument("polynomial eval: point dimension mismatch");
    double acc = 0.0;
    for (const auto& [e, c] : terms_) {
        double t = c;
        for (int i = 0; i < nvars_; ++i)
            for (int k = 0; k < e[i]; ++k) t *= x[i];
        acc += t;
    }
    return acc;
}

Polynomial Polynomial::partial(int var) const {
    Polynomial out(nvars_);
    for (const auto& [e, c] : terms_) {
        if (e.at(var) == 0) continue;
        Exponents d = e;
        d[var] -= 1;
        out.add_term(d, c * e[var]);
    }
    return out;
}

std::vector<Polynomial> Polynomial::coefficients_in(int var) const {
    std::vector<Polynomial> coeffs(degree_in(var) + 1, Polynomial(nvars_));
    for (const auto& [e, c] : terms_) {
        Exponents d = e;
        int k = d.at(var);
        d[var] = 0;
        coeffs[k].add_term(d, c);
    }
    return coeffs;
}

Polynomial Polynomial::drop_var(int var) const {
    if (degree_in(var) != 0)
        throw std::logic_error("drop_var: polynomial still depends on variable");
    Polynomial out(nvars_ - 1);
    for (const auto& [e, c] : terms_) {
        Exponents d;
        d.reserve(nvars_ - 1);
        for (int i = 0; i < nvars_; ++i)
            if (i != var) d.push_back(e[i]);
        out.add_term(d, c);
    }
    return out;
}

Polynomial Polynomial::remap(int new_nvars, const std::vector<int>& index_map) const {
    if (static_cast<int>(index_map.size()) != nvars_)
        throw std::invalid_argument("remap: index map size mismatch");
    Polynomial out(new_nvars);
    for (const auto& [e, c] : terms_) {
        Exponents d(new_nvars, 0);
        for (int i = 0; i < nvars_; ++i) {
            if (e[i] != 0) d.at(index_map[i]) += e[i];
        }
        out.add_term(d, c);
    }
    return out;
}

Polynomial Polynomial::substitute_linear(const Eigen::MatrixXd& T,
                                         const Eigen::VectorXd& offset) const {
    if (T.rows() != nvars_ || offset.size() != nvars_)
        throw std::invalid_argument("substitute_linear: shape mismatch");
    const int m = static_cast<int>(T.cols());

    // linear form for each old variable
    std::vector<Polynomial> forms;
    forms.reserve(nvars_);
    for (int i = 0; i < nvars_; ++i) {
        Polynomial f = Polynomial::constant(m, offset[i]);
        for (int j = 0; j < m; ++j)
            if (T(i, j) != 0.0) f = f + Polynomial::variable(m, j) * T(i, j);
        forms.push_back(std::move(f));
    }

    Polynomial out(m);
    for (const auto& [e, c] : terms_) {
        Polynomial t = Polynomial::constant(m, c);
        for (int i = 0; i < nvars_; ++i)
            if (e[i] > 0) t = t * forms[i].pow(e[i]);
        out = out + t;
    }
    return out;
}

Polynomial Polynomial::pruned(double rel_tol) const {
    const double cut = rel_tol * coeff_scale();
    Polynomial out(nvars_);
    for (const auto& [e, c] : terms_)
        if (std::abs(c) > cut) out.terms_[e] = c;
    return out;
}

void Polynomial::add_term(const Exponents& e, double c) {
    if (c == 0.0) return;
    auto [it, inserted] = terms_.try_emplace(e, c);
    if (!inserted) {
        it->second += c;
        if (it->second == 0.0) terms_.erase(it);
    }
}

Polynomial Polynomial::operator-() const {
    Polynomial out(nvars_);
    for (const auto& [e, c] : terms_) out.terms_[e] = -c;
    return out;
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
    require_same_space(nvars_, o.nvars_, "+");
    Polynomial out = *this;
    for (const auto& [e, c] : o.terms_) out.add_term(e, c);
    return out;
}

Polynomial Polynomial::operator-(const Polynomial& o) const {
    require_same_space(nvars_, o.nvars_, "-");
    Polynomial out = *this;
    for (const auto& [e, c] : o.terms_) out.add_term(e, -c);
    return out;
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
    require_same_space(nvars_, o.nvars_, "*");
    Polynomial out(nvars_);
    for (const auto& [ea, ca] : terms_) {
        for (const auto& [eb, cb] : o.terms_) {
            Exponents e(nvars_);
            for (int i = 0; i < nvars_; ++i) e[i] = ea[i] + eb[i];
            out.add_term(e, ca * cb);
        }
    }
    return out;
}

Polynomial Polynomial::operator*(double s) const {
    Polynomial out(nvars_);
    if (s == 0.0) return out;
    for (const auto& [e, c] : terms_) out.terms_[e] = c * s;
    return out;
}

Polynomial Polynomial::pow(int k) const {
    if (k < 0) throw std::invalid_argument("pow: negative exponent");
    Polynomial out = Polynomial::constant(nvars_, 1.0);
    for (int i = 0; i < k; ++i) out = out * (*this);
    return out;
}

bool Polynomial::try_divide(const Polynomial& num, const Polynomial& den,
                            Polynomial& quotient) {
    require_same_space(num.nvars_, den.nvars_, "/");
    if (den.is_zero()) return false;
    const double num_scale = num.coeff_scale();
    const double den_scale = den.coeff_scale();

    Polynomial r = num.pruned(1e-13);
    Polynomial q(num.nvars_);
    const auto lead_den = std::prev(den.terms_.end());

    int guard = 0;
    while (!r.terms_.empty()) {
        if (++guard > 10000) return false;
        const auto lead_r = std::prev(r.terms_.end());
        Exponents diff(num.nvars_);
        bool divisible = true;
        for (int i = 0; i < num.nvars_; ++i) {
            diff[i] = lead_r->first[i] - lead_den->first[i];
            if (diff[i] < 0) { divisible = false; break; }
        }
        if (!divisible) return false;
        const double c = lead_r->second / lead_den->second;
        Polynomial t = Polynomial::monomial(num.nvars_, diff, c);
        q = q + t;
        r = (r - t * den).pruned(0.0);
        // drop round-off left behind by the cancellation
        const double cut = 1e-10 * std::max(num_scale, den_scale * std::abs(c));
        Polynomial cleaned(num.nvars_);
        for (const auto& [e, cc] : r.terms_)
            if (std::abs(cc) > cut) cleaned.terms_[e] = cc;
        r = cleaned;
    }
    quotient = q;
    return true;
}

std::string Polynomial::to_string(const std::vector<std::string>& names) const {
    if (terms_.empty()) return "0";
    std::string out;
    bool first = true;
    for (const auto& [e, c] : terms_) {
        double coeff = c;
        if (!first) {
            out += (coeff < 0) ? " - " : " + ";
            if (coeff < 0) coeff = -coeff;
        } else if (coeff < 0) {
            out += "-";
            coeff = -coeff;
        }
        first = false;

        std::string vars;
        for (int i = 0; i < nvars_; ++i) {
            if (e[i] == 0) continue;
            if (!vars.empty()) vars += "*";
            vars += (i < static_cast<int>(names.size())) ? names[i]
                                                         : "x" + std::to_string(i + 1);
            if (e[i] > 1) vars += "^" + std::to_string(e[i]);
        }
        if (vars.empty()) {
            out += format_coeff(coeff);
        } else if (coeff == 1.0) {
            out += vars;
        } else {
            out += format_coeff(coeff) + "*" + vars;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

Rational::Rational(Polynomial num)
    : num_(std::move(num)), den_(Polynomial::constant(num_.nvars(), 1.0)) {}

Rational::Rational(Polynomial num, Polynomial den)
    : num_(std::move(num)), den_(std::move(den)) {
    require_same_space(num_.nvars(), den_.nvars(), "rational");
    if (den_.is_zero()) throw std::invalid_argument("rational: zero denominator");
}

Rational Rational::constant(int nvars, double c) {
    return Rational(Polynomial::constant(nvars, c));
}

Rational Rational::variable(int nvars, int index) {
    return Rational(Polynomial::variable(nvars, index));
}

Polynomial Rational::as_polynomial() const {
    if (!is_polynomial())
        throw std::logic_error("as_polynomial: denominator is not constant");
    return num_ * (1.0 / den_.constant_value());
}

double Rational::eval(const Eigen::VectorXd& x) const {
    const double d = den_.eval(x);
    if (d == 0.0)
        throw std::domain_error("rational eval: denominator vanishes at point");
    return num_.eval(x) / d;
}

Eigen::VectorXd Rational::gradient(const Eigen::VectorXd& x) const {
    Eigen::VectorXd g(nvars());
    const double n = num_.eval(x);
    const double d = den_.eval(x);
    if (d == 0.0)
        throw std::domain_error("rational gradient: denominator vanishes at point");
    for (int i = 0; i < nvars(); ++i) {
        const double dn = num_.partial(i).eval(x);
        const double dd = den_.partial(i).eval(x);
        g[i] = (dn * d - n * dd) / (d * d);
    }
    return g;
}

Rational Rational::partial(int var) const {
    if (is_polynomial()) return Rational(as_polynomial().partial(var));
    Polynomial n = num_.partial(var) * den_ - num_ * den_.partial(var);
    return Rational(std::move(n), den_ * den_).simplified();
}

bool Rational::depends_on(int var) const {
    return num_.depends_on(var) || den_.depends_on(var);
}

Rational Rational::drop_var(int var) const {
    return Rational(num_.drop_var(var), den_.drop_var(var));
}

Rational Rational::remap(int new_nvars, const std::vector<int>& index_map) const {
    return Rational(num_.remap(new_nvars, index_map),
                    den_.remap(new_nvars, index_map));
}

Rational Rational::substitute_var(int var, const Rational& value) const {
    if (value.depends_on(var))
        throw std::invalid_argument("substitute_var: value depends on the variable");

    auto substitute_poly = [&](const Polynomial& p, Polynomial& out_num, int& deg) {
        deg = p.degree_in(var);
        auto coeffs = p.coefficients_in(var);
        Polynomial acc(p.nvars());
        for (int k = 0; k <= deg; ++k) {
            if (coeffs[k].is_zero()) continue;
            Polynomial term = coeffs[k] * value.num().pow(k) * value.den().pow(deg - k);
            acc = acc + term;
        }
        out_num = acc;
    };

    Polynomial pn(nvars()), pd(nvars());
    int dn = 0, dd = 0;
    substitute_poly(num_, pn, dn);
    substitute_poly(den_, pd, dd);
    // num/V^dn over den/V^dd
    Polynomial n = pn, d = pd;
    if (dd > dn) n = n * value.den().pow(dd - dn);
    if (dn > dd) d = d * value.den().pow(dn - dd);
    Rational out(n.pruned(1e-13).drop_var(var), d.pruned(1e-13).drop_var(var));
    return out.simplified();
}

Rational Rational::substitute_linear(const Eigen::MatrixXd& T,
                                     const Eigen::VectorXd& offset) const {
    return Rational(num_.substitute_linear(T, offset).pruned(1e-13),
                    den_.substitute_linear(T, offset).pruned(1e-13))
        .simplified();
}

Rational Rational::operator-() const { return Rational(-num_, den_); }

Rational Rational::operator+(const Rational& o) const {
    if (den_ == o.den_) return Rational(num_ + o.num_, den_);
    return Rational(num_ * o.den_ + o.num_ * den_, den_ * o.den_).simplified();
}

Rational Rational::operator-(const Rational& o) const { return *this + (-o); }

Rational Rational::operator*(const Rational& o) const {
    return Rational(num_ * o.num_, den_ * o.den_).simplified();
}

Rational Rational::operator*(double s) const { return Rational(num_ * s, den_); }

Rational Rational::operator/(const Rational& o) const {
    if (o.num_.is_zero()) throw std::invalid_argument("rational division by zero");
    return Rational(num_ * o.den_, den_ * o.num_).simplified();
}

Rational Rational::simplified() const {
    if (num_.is_zero())
        return Rational(Polynomial(nvars()), Polynomial::constant(nvars(), 1.0));

    Polynomial n = num_, d = den_;

    // cancel the common monomial factor
    Polynomial::Exponents common(nvars(), 0);
    bool first = true;
    auto scan = [&](const Polynomial& p) {
        for (const auto& [e, c] : p.terms()) {
            if (first) {
                common = e;
                first = false;
            } else {
                for (int i = 0; i < nvars(); ++i) common[i] = std::min(common[i], e[i]);
            }
        }
    };
    scan(n);
    scan(d);
    bool any = false;
    for (int c : common) any = any || c > 0;
    if (any) {
        auto strip = [&](const Polynomial& p) {
            Polynomial out(nvars());
            for (const auto& [e, c] : p.terms()) {
                Polynomial::Exponents r(nvars());
                for (int i = 0; i < nvars(); ++i) r[i] = e[i] - common[i];
                out = out + Polynomial::monomial(nvars(), r, c);
            }
            return out;
        };
        n = strip(n);
        d = strip(d);
    }

    if (d.is_constant()) {
        const double c = d.constant_value();
        return Rational(n * (1.0 / c));
    }
    Polynomial q(nvars());
    if (Polynomial::try_divide(n, d, q)) return Rational(std::move(q));
    return Rational(std::move(n), std::move(d));
}

std::string Rational::to_string(const std::vector<std::string>& names) const {
    if (is_polynomial()) return as_polynomial().to_string(names);
    return "(" + num_.to_string(names) + ") / (" + den_.to_string(names) + ")";
}

} // namespace ontolab

#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

namespace ontolab {

/// Sparse multivariate polynomial with double coefficients.
///
/// Terms are kept in a map from exponent vectors to coefficients, so iteration
/// order (and hence printing and serialization) is deterministic. The number
/// of variables is fixed at construction; mixing polynomials over different
/// variable counts throws.
class Polynomial {
public:
    using Exponents = std::vector<int>;

    explicit Polynomial(int nvars = 0) : nvars_(nvars) {}

    static Polynomial constant(int nvars, double c);
    static Polynomial variable(int nvars, int index);
    static Polynomial monomial(int nvars, Exponents exps, double coeff);

    int nvars() const { return nvars_; }
    bool empty() const { return terms_.empty(); }
    const std::map<Exponents, double>& terms() const { return terms_; }

    /// Largest absolute coefficient (0 for the zero polynomial).
    double coeff_scale() const;
    bool is_zero(double tol = 0.0) const;
    bool is_constant() const;
    double constant_value() const;

    int total_degree() const;
    int degree_in(int var) const;
    bool depends_on(int var) const { return degree_in(var) > 0; }

    double eval(const Eigen::VectorXd& x) const;
    Polynomial partial(int var) const;

    /// Coefficient polynomials with respect to one variable: returns
    /// c[0] + c[1]*x_var + c[2]*x_var^2 + ...; each c[k] has exponent 0 in var.
    std::vector<Polynomial> coefficients_in(int var) const;

    /// Remove a variable that the polynomial does not depend on, shifting
    /// the indices of the variables above it down by one.
    Polynomial drop_var(int var) const;

    /// Embed into a larger variable space: old variable i becomes new
    /// variable index_map[i].
    Polynomial remap(int new_nvars, const std::vector<int>& index_map) const;

    /// Substitute x_i = sum_j T(i,j) y_j + offset(i). T is nvars x new_nvars.
    Polynomial substitute_linear(const Eigen::MatrixXd& T,
                                 const Eigen::VectorXd& offset) const;

    /// Drop coefficients below tol * coeff_scale(). Used after substitutions
    /// to discard cancellation dust.
    Polynomial pruned(double rel_tol = 1e-12) const;

    Polynomial operator-() const;
    Polynomial operator+(const Polynomial& o) const;
    Polynomial operator-(const Polynomial& o) const;
    Polynomial operator*(const Polynomial& o) const;
    Polynomial operator*(double s) const;
    Polynomial pow(int k) const;

    bool operator==(const Polynomial& o) const = default;

    /// Exact multivariate division. Returns true and sets quotient when
    /// num == quotient * den up to a tiny relative remainder.
    static bool try_divide(const Polynomial& num, const Polynomial& den,
                           Polynomial& quotient);

    std::string to_string(const std::vector<std::string>& names = {}) const;

private:
    void add_term(const Exponents& e, double c);

    int nvars_;
    std::map<Exponents, double> terms_;
};

inline Polynomial operator*(double s, const Polynomial& p) { return p * s; }

/// Ratio of two polynomials. The denominator defaults to 1, in which case
/// the value is an ordinary polynomial. No automatic gcd is attempted beyond
/// a cheap monomial factor and one exact-division pass in simplified().
class Rational {
public:
    Rational() : num_(0), den_(Polynomial::constant(0, 1.0)) {}
    explicit Rational(Polynomial num);
    Rational(Polynomial num, Polynomial den);

    static Rational constant(int nvars, double c);
    static Rational variable(int nvars, int index);

    const Polynomial& num() const { return num_; }
    const Polynomial& den() const { return den_; }
    int nvars() const { return num_.nvars(); }

    bool is_zero(double tol = 0.0) const { return num_.is_zero(tol); }
    bool is_polynomial() const { return den_.is_constant(); }
    /// Valid only when is_polynomial().
    Polynomial as_polynomial() const;

    double eval(const Eigen::VectorXd& x) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
    Rational partial(int var) const;

    bool depends_on(int var) const;
    Rational drop_var(int var) const;
    Rational remap(int new_nvars, const std::vector<int>& index_map) const;

    /// Substitute x_var = value (a rational in the same variable space that
    /// must not itself depend on x_var), then remove the variable.
    Rational substitute_var(int var, const Rational& value) const;
    Rational substitute_linear(const Eigen::MatrixXd& T,
                               const Eigen::VectorXd& offset) const;

    Rational operator-() const;
    Rational operator+(const Rational& o) const;
    Rational operator-(const Rational& o) const;
    Rational operator*(const Rational& o) const;
    Rational operator*(double s) const;
    Rational operator/(const Rational& o) const;

    /// Cancel a common monomial factor and, when the denominator divides the
    /// numerator exactly, collapse to a polynomial.
    Rational simplified() const;

    std::string to_string(const std::vector<std::string>& names = {}) const;

private:
    Polynomial num_, den_;
};

} // namespace ontolab

#include "ontolab/flow.hpp"

#include <stdexcept>

namespace ontolab {

FlowField polynomial_flow(std::vector<Polynomial> components, std::string name) {
    if (components.empty())
        throw std::invalid_argument("polynomial_flow: need at least one component");
    const int dim = static_cast<int>(components.size());
    for (const auto& c : components)
        if (c.nvars() != dim)
            throw std::invalid_argument(
                "polynomial_flow: each component must be a polynomial in q_1..q_N");

    std::vector<std::vector<Polynomial>> partials(dim);
    for (int i = 0; i < dim; ++i) {
        partials[i].reserve(dim);
        for (int j = 0; j < dim; ++j) partials[i].push_back(components[i].partial(j));
    }

    FlowField f;
    f.dim = dim;
    f.name = std::move(name);
    f.components = components;
    f.eval = [components](const Eigen::VectorXd& q, Eigen::VectorXd& out) {
        for (size_t i = 0; i < components.size(); ++i)
            out[static_cast<int>(i)] = components[i].eval(q);
    };
    f.jacobian = [partials, dim](const Eigen::VectorXd& q, Eigen::MatrixXd& out) {
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) out(i, j) = partials[i][j].eval(q);
    };
    return f;
}

FlowField zero_flow(int dim) {
    std::vector<Polynomial> comps(dim, Polynomial(dim));
    FlowField f = polynomial_flow(std::move(comps), "zero");
    return f;
}

FlowField linear_flow(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols() || a.rows() == 0)
        throw std::invalid_argument("linear_flow: need a square matrix");
    const int dim = static_cast<int>(a.rows());
    std::vector<Polynomial> comps;
    comps.reserve(dim);
    for (int i = 0; i < dim; ++i) {
        Polynomial c(dim);
        for (int j = 0; j < dim; ++j)
            if (a(i, j) != 0.0) c = c + Polynomial::variable(dim, j) * a(i, j);
        comps.push_back(std::move(c));
    }
    return polynomial_flow(std::move(comps), "linear");
}

FlowField rotation_flow(double omega) {
    Eigen::MatrixXd a(2, 2);
    a << 0.0, omega, -omega, 0.0;
    FlowField f = linear_flow(a);
    f.name = "rotation";
    return f;
}

} // namespace ontolab

#pragma once

#include "ontolab/polynomial.hpp"

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace ontolab {

/// Autonomous velocity field f(q) on configuration space, with its Jacobian.
/// The registered families are polynomial, so the Jacobian is exact and the
/// components are available symbolically (variables q_1..q_N).
struct FlowField {
    int dim = 0;
    std::string name;
    std::function<void(const Eigen::VectorXd& q, Eigen::VectorXd& f)> eval;
    std::function<void(const Eigen::VectorXd& q, Eigen::MatrixXd& jac)> jacobian;
    std::vector<Polynomial> components; // empty when not polynomial

    Eigen::VectorXd operator()(const Eigen::VectorXd& q) const {
        Eigen::VectorXd f(dim);
        eval(q, f);
        return f;
    }
    Eigen::MatrixXd jac(const Eigen::VectorXd& q) const {
        Eigen::MatrixXd J(dim, dim);
        jacobian(q, J);
        return J;
    }
    bool is_polynomial() const { return !components.empty(); }
};

FlowField zero_flow(int dim);
FlowField linear_flow(const Eigen::MatrixXd& a);
/// Planar field (omega*q2, -omega*q1): rigid clockwise rotation at rate omega.
FlowField rotation_flow(double omega = 1.0);
/// General polynomial field from per-component polynomials in q_1..q_N.
FlowField polynomial_flow(std::vector<Polynomial> components, std::string name = "polynomial");

} // namespace ontolab

#pragma once

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace hazardsieve {

struct OptimizerOptions {
    int max_iter = 500;
    double grad_tol = 1e-7;  // on the max-norm of the gradient
    int memory = 10;
    double armijo = 1e-4;
    int max_halvings = 40;
};

struct OptimizerResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd grad;
    bool converged = false;
    int iterations = 0;
    double grad_norm = 0.0;
    std::vector<double> trace;  // objective at every accepted iterate
};

/// Returns f(x) and writes its gradient.
using ValueGradient = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

/// Limited-memory BFGS ascent with backtracking on a sufficient-increase
/// condition. Curvature pairs with s^T y <= 0 are skipped.
OptimizerResult maximize_lbfgs(const ValueGradient& f, Eigen::VectorXd x0, const OptimizerOptions& options = {});

}  // namespace hazardsieve

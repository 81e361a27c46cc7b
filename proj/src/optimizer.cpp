#include "hazardsieve/optimizer.hpp"

#include <cmath>
#include <deque>

namespace hazardsieve {

namespace {

struct CurvaturePair {
    Eigen::VectorXd s;
    Eigen::VectorXd y;
    double rho;
};

// Two-loop recursion on the minimization problem -f, returning an ascent
// direction for f.
Eigen::VectorXd ascent_direction(const std::deque<CurvaturePair>& pairs, const Eigen::VectorXd& grad)
{
    Eigen::VectorXd q = -grad;
    std::vector<double> alpha(pairs.size());
    for (std::size_t k = pairs.size(); k-- > 0;) {
        alpha[k] = pairs[k].rho * pairs[k].s.dot(q);
        q -= alpha[k] * pairs[k].y;
    }
    if (!pairs.empty()) {
        const auto& last = pairs.back();
        q *= last.s.dot(last.y) / last.y.squaredNorm();
    }
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const double beta = pairs[k].rho * pairs[k].y.dot(q);
        q += (alpha[k] - beta) * pairs[k].s;
    }
    return -q;
}

}  // namespace

OptimizerResult maximize_lbfgs(const ValueGradient& f, Eigen::VectorXd x0, const OptimizerOptions& options)
{
    OptimizerResult r;
    r.x = std::move(x0);
    r.value = f(r.x, r.grad);
    r.trace.push_back(r.value);
    r.grad_norm = r.grad.size() ? r.grad.lpNorm<Eigen::Infinity>() : 0.0;
    if (!std::isfinite(r.value)) return r;

    std::deque<CurvaturePair> pairs;
    Eigen::VectorXd x_new;
    Eigen::VectorXd g_new;
    bool reset_scale = true;
    while (r.iterations < options.max_iter) {
        if (r.grad_norm < options.grad_tol) {
            r.converged = true;
            break;
        }
        Eigen::VectorXd dir = ascent_direction(pairs, r.grad);
        double slope = r.grad.dot(dir);
        if (!(slope > 0.0)) {
            pairs.clear();
            dir = r.grad;
            slope = r.grad.squaredNorm();
            reset_scale = true;
        }
        double step = 1.0;
        if (reset_scale) step = std::min(1.0, 1.0 / dir.lpNorm<Eigen::Infinity>());

        bool accepted = false;
        double f_new = 0.0;
        for (int halving = 0; halving <= options.max_halvings; ++halving) {
            x_new = r.x + step * dir;
            f_new = f(x_new, g_new);
            if (std::isfinite(f_new) && f_new >= r.value + options.armijo * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (pairs.empty()) break;  // even steepest ascent cannot improve
            pairs.clear();
            reset_scale = true;
            continue;
        }
        reset_scale = false;
        ++r.iterations;

        // Pairs for the minimization of -f.
        CurvaturePair pair{x_new - r.x, r.grad - g_new, 0.0};
        const double sy = pair.s.dot(pair.y);
        if (sy > 1e-12 * pair.s.norm() * pair.y.norm()) {
            pair.rho = 1.0 / sy;
            pairs.push_back(std::move(pair));
            if (static_cast<int>(pairs.size()) > options.memory) pairs.pop_front();
        }
        r.x.swap(x_new);
        r.grad.swap(g_new);
        r.value = f_new;
        r.grad_norm = r.grad.lpNorm<Eigen::Infinity>();
        r.trace.push_back(r.value);
    }
    if (r.grad_norm < options.grad_tol) r.converged = true;
    return r;
}

}  // namespace hazardsieve

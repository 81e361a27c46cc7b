#pragma once

#include <Eigen/Core>

#include <utility>
#include <vector>

namespace hazardsieve {

/// B-spline sieve space of a given order on [lower, upper] with simple
/// interior knots, optionally constrained to natural splines (zero second
/// derivative at both boundaries).
///
/// Coefficients live in "free" coordinates of length dim(); the constraint
/// map turns them into raw B-spline coefficients (identity when not natural).
class SplineBasis {
public:
    SplineBasis(int order, std::vector<double> interior_knots, std::pair<double, double> boundary,
                bool natural = false);

    [[nodiscard]] int order() const noexcept { return order_; }
    [[nodiscard]] bool natural() const noexcept { return natural_; }
    [[nodiscard]] int raw_dim() const noexcept { return raw_dim_; }
    [[nodiscard]] int dim() const noexcept { return static_cast<int>(map_.cols()); }
    [[nodiscard]] double lower() const noexcept { return lower_; }
    [[nodiscard]] double upper() const noexcept { return upper_; }
    [[nodiscard]] const std::vector<double>& interior_knots() const noexcept { return interior_; }
    [[nodiscard]] const std::vector<double>& knot_vector() const noexcept { return knots_; }
    [[nodiscard]] const Eigen::MatrixXd& constraint_map() const noexcept { return map_; }

    /// Raw B-spline values at t (length raw_dim()); the right boundary
    /// returns left limits.
    [[nodiscard]] Eigen::VectorXd eval_raw(double t) const;

    /// deriv-th derivative of the raw basis at t.
    [[nodiscard]] Eigen::VectorXd eval_raw_derivative(double t, int deriv) const;

    /// Basis values in free coordinates (length dim()).
    [[nodiscard]] Eigen::VectorXd eval(double t) const;

    /// Free coefficients whose spline is the constant function 1.
    [[nodiscard]] Eigen::VectorXd constant_coefficients() const;

    /// gamma^T B(t).
    [[nodiscard]] double curve(const Eigen::VectorXd& gamma, double t) const;

    /// Knot locations strictly inside (a, b), sorted and deduplicated.
    [[nodiscard]] std::vector<double> breakpoints_in(double a, double b) const;

private:
    [[nodiscard]] std::vector<std::vector<double>> table(double t) const;

    int order_;
    bool natural_;
    double lower_;
    double upper_;
    std::vector<double> interior_;
    std::vector<double> knots_;
    int raw_dim_;
    Eigen::MatrixXd map_;
};

inline SplineBasis build_basis(int order, std::vector<double> interior_knots,
                               std::pair<double, double> boundary, bool natural)
{
    return SplineBasis(order, std::move(interior_knots), boundary, natural);
}

/// Rate-guided interior knot count max(2, ceil(n^(3 / (3 + 10 kappa)))).
int default_knot_count(std::size_t n, int kappa = 2);

/// k interior knots at the j/(k+1) sample quantiles of `times`, restricted to
/// the open interval (lower, upper).
std::vector<double> quantile_knots(std::vector<double> times, int k, double lower, double upper);

}  // namespace hazardsieve

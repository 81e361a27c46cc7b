#pragma once

#include "hazardsieve/dataset.hpp"
#include "hazardsieve/kernel.hpp"
#include "hazardsieve/likelihood.hpp"
#include "hazardsieve/optimizer.hpp"
#include "hazardsieve/quadrature.hpp"
#include "hazardsieve/spline.hpp"
#include "hazardsieve/transform.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace hazardsieve {

/// Estimation failure with a stable machine-readable code
/// ("no-weighted-events", "singular-information", "no-events", ...).
class EstimationError : public std::runtime_error {
public:
    EstimationError(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message)
        , code_(std::move(code))
    {
    }
    [[nodiscard]] const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

struct BasisConfig {
    int order = 3;
    /// Explicit interior knots; when empty, `num_knots` quantile knots of the
    /// observed follow-up times are used (rate-guided count if unset).
    std::vector<double> interior_knots;
    std::optional<int> num_knots;
    bool natural = false;
};

SplineBasis make_basis(const Dataset& data, const BasisConfig& config);

struct CvGrid {
    std::vector<double> grid;  // empty: default_cv_grid(n)
    int folds = 5;
    std::uint64_t seed = 1;
};

struct FitConfig {
    double s = 0.0;
    std::variant<double, CvGrid> bandwidth = 0.1;
    BasisConfig basis;
    QuadratureRule quad{16};
    KernelSpec kernel;
    int max_iter = 500;
    double grad_tol = 1e-7;
    double floor_eps = 1e-8;
    std::optional<SieveParams> init;
    bool compute_variance = true;
};

struct FitResult {
    Eigen::VectorXd beta_hat;
    Eigen::VectorXd gamma_hat;
    double loglik = 0.0;
    bool converged = false;
    int iterations = 0;
    double grad_norm = 0.0;
    Eigen::MatrixXd covariance;  // p x p
    Eigen::VectorXd se;
    double h_used = 0.0;
    bool barrier_touched = false;
    std::size_t n = 0;
    std::optional<SplineBasis> basis;
    std::vector<double> trace;
    std::vector<std::string> warnings;
    std::size_t dropped_variance_terms = 0;

    [[nodiscard]] int p() const noexcept { return static_cast<int>(beta_hat.size()); }
    [[nodiscard]] int q() const noexcept { return static_cast<int>(gamma_hat.size()); }
    /// alpha-hat(t) = gamma-hat^T B(t).
    [[nodiscard]] double alpha(double t) const;
    /// alpha-hat on `points` uniform times over the basis domain.
    [[nodiscard]] std::vector<std::pair<double, double>> alpha_curve(int points = 101) const;
};

struct CVReport {
    std::vector<double> grid;
    std::vector<double> mean_loss;
    double chosen_h = 0.0;
    int fold_count = 0;
    /// Loss convention recorded alongside the numbers.
    std::string convention = "mean over folds of the held-out mean negative kernel-weighted log-likelihood";
};

struct VarianceResult {
    Eigen::MatrixXd covariance;
    Eigen::VectorXd se;
    Eigen::MatrixXd xi;
    Eigen::MatrixXd omega;
    std::size_t dropped_terms = 0;
};

struct WaldResult {
    double z = 0.0;
    double p_value = 1.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

/// beta = 0 and a constant baseline at G(events / total follow-up).
SieveParams default_init(const Dataset& data, const SplineBasis& basis, const BoxCoxTransform& tr);

/// 8 geometric points on [0.5 n^-0.5, 4 n^-0.4].
std::vector<double> default_cv_grid(std::size_t n);

FitResult fit(const Dataset& data, const FitConfig& config);

/// Fit at a fixed bandwidth on a prebuilt basis.
FitResult fit_with_basis(const Dataset& data, const FitConfig& config, const SplineBasis& basis, double h);

CVReport cv_bandwidth(const Dataset& data, const FitConfig& config, std::vector<double> grid, int folds,
                      std::uint64_t seed);

/// Kernel-weighted sandwich covariance of beta-hat, Xi^-1 Omega Xi^-1 / (n h).
VarianceResult sandwich_variance(const Dataset& data, const FitResult& fit, const SplineBasis& basis,
                                 const BoxCoxTransform& tr, const QuadratureRule& quad,
                                 const KernelSpec& kernel = {});

/// A^-1 (sum_i U_i U_i^T / n^2) A^-1 for a mean log-likelihood, with A the
/// finite-difference Hessian of the analytic gradient; returns the leading
/// p x p block.
VarianceResult score_sandwich(const SieveObjective& objective, const Eigen::VectorXd& theta, int p);

std::vector<WaldResult> wald(const FitResult& fit);

double bic(const FitResult& fit, std::size_t n);

/// Cauchy combination of p-values in (0, 1).
double cauchy_combine(const std::vector<double>& pvals);

double normal_cdf(double x) noexcept;

}  // namespace hazardsieve

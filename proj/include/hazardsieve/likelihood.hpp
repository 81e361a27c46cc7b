#pragma once

#include "hazardsieve/dataset.hpp"
#include "hazardsieve/kernel.hpp"
#include "hazardsieve/quadrature.hpp"
#include "hazardsieve/spline.hpp"
#include "hazardsieve/transform.hpp"

#include <Eigen/Core>

#include <vector>

namespace hazardsieve {

/// (beta, gamma): regression coefficients and spline coefficients. Packed
/// vectors used by the optimizer store beta first, then gamma.
struct SieveParams {
    Eigen::VectorXd beta;
    Eigen::VectorXd gamma;

    [[nodiscard]] Eigen::VectorXd pack() const;
    static SieveParams unpack(const Eigen::VectorXd& theta, int p);
};

/// Discretized likelihood terms. Every column of `event_x` / `cum_x` is a
/// regressor vector (z, B(t)) so that the linear predictor is x^T theta.
///
///   loglik = (1/n) [ sum_e event_w[e] log H(eta_e) - sum_c cum_w[c] H(eta_c) ]
struct LikelihoodDesign {
    int p = 0;
    int q = 0;
    std::size_t n = 0;

    Eigen::MatrixXd event_x;
    Eigen::VectorXd event_w;
    std::vector<int> event_subject;
    std::vector<double> event_time;

    Eigen::MatrixXd cum_x;
    Eigen::VectorXd cum_w;
    std::vector<int> cum_subject;
    std::vector<double> cum_time;

    /// Subjects with delta = 1 (weighted or not).
    std::size_t raw_events = 0;

    [[nodiscard]] int dim() const noexcept { return p + q; }
    [[nodiscard]] bool empty() const noexcept { return event_w.size() == 0 && cum_w.size() == 0; }
};

/// Kernel-weighted terms: measurement j of subject i contributes an event term
/// K_h(X_i - R_ij) log H(...) when delta_i = 1, and a cumulative term over
/// [R_ij, min(X_i, R_ij + h)] split at spline knots.
LikelihoodDesign build_kernel_design(const Dataset& data, double h, const SplineBasis& basis,
                                     const QuadratureRule& quad, const KernelSpec& kernel = {});

/// Unweighted terms with the covariate path imputed by carrying each
/// measurement forward (the first one also backward to 0).
LikelihoodDesign build_lvcf_design(const Dataset& data, const SplineBasis& basis, const QuadratureRule& quad);

/// Log-likelihood surface over a fixed design.
class SieveObjective {
public:
    SieveObjective(LikelihoodDesign design, BoxCoxTransform transform);

    [[nodiscard]] const LikelihoodDesign& design() const noexcept { return design_; }
    [[nodiscard]] const BoxCoxTransform& transform() const noexcept { return transform_; }
    [[nodiscard]] int dim() const noexcept { return design_.dim(); }

    [[nodiscard]] double value(const Eigen::VectorXd& theta) const;
    double value_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const;

    /// Per-subject (unnormalized) log-likelihood contributions.
    [[nodiscard]] Eigen::VectorXd subject_values(const Eigen::VectorXd& theta) const;
    /// Per-subject score vectors, one column per subject (unnormalized).
    [[nodiscard]] Eigen::MatrixXd subject_scores(const Eigen::VectorXd& theta) const;

    /// True when some event term or quadrature node lies on the transform's
    /// positivity tail.
    [[nodiscard]] bool touches_tail(const Eigen::VectorXd& theta) const;

private:
    LikelihoodDesign design_;
    BoxCoxTransform transform_;
};

double loglik(const SieveParams& params, const Dataset& data, double h, const SplineBasis& basis,
              const BoxCoxTransform& tr, const QuadratureRule& quad);

/// Gradient with respect to the packed (beta, gamma) vector.
Eigen::VectorXd loglik_grad(const SieveParams& params, const Dataset& data, double h, const SplineBasis& basis,
                            const BoxCoxTransform& tr, const QuadratureRule& quad);

/// Reference evaluation by adaptive Simpson (absolute tolerance 1e-11) with no
/// knot splitting. Limited to n <= 50.
double loglik_oracle(const SieveParams& params, const Dataset& data, double h, const SplineBasis& basis,
                     const BoxCoxTransform& tr);

}  // namespace hazardsieve

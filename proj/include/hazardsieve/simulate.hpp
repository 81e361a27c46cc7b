#pragma once

#include "hazardsieve/dataset.hpp"
#include "hazardsieve/estimator.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hazardsieve {

using Rng = std::mt19937_64;

/// Independent generator for stream `index` of a master seed. Streams depend
/// only on (master, index), never on the order in which they are created.
Rng make_stream(std::uint64_t master, std::uint64_t index);

struct SimConfig {
    double s = 0.0;
    int n = 200;
    double beta1 = 1.0;
    double beta2 = -0.5;
    double censor_target = 0.2;
    std::optional<double> c_lower;  // lower end of the censoring uniform, calibrated
    std::uint64_t seed = 1;
    int segments = 20;
    double obs_rate_base = 8.0;
    double obs_rate_amp = 0.5;
};

/// Z1 is a step function with `segments` levels on [0, 1); Z2 is binary.
struct SimCovariates {
    std::vector<double> z1_steps;
    int z2 = 0;

    /// Z1(t); frozen at the last level for t >= 1.
    [[nodiscard]] double z1_at(double t) const;
};

/// Correlated standard normals z_1..z_K with covariance exp(-|j - k| / 20)
/// mapped to levels 2 (Phi(z_k) - 0.5), and Z2 = 1{mean level + u_star > 0}.
SimCovariates gen_covariates(const SimConfig& cfg, Rng& rng);
SimCovariates covariates_from_draws(std::span<const double> correlated_normals, double u_star);

/// Lower Cholesky factor of the level covariance.
Eigen::MatrixXd level_covariance_factor(int segments);

/// Baseline alpha(t) = 0.75 ((s + 1) / 2 + t (1 - sin(2 pi (t - 0.25)))).
double true_alpha(double s, double t);
double true_hazard(const SimConfig& cfg, double t, double z1_at_t, int z2);

/// Integrated hazard over [0, t] for a covariate path.
double cumulative_hazard(const SimConfig& cfg, const SimCovariates& cov, double t);

/// Failure time T with cumulative hazard equal to `target` (a unit
/// exponential draw in the simulation).
double invert_cumulative_hazard(const SimConfig& cfg, const SimCovariates& cov, double target);
double draw_failure(const SimConfig& cfg, const SimCovariates& cov, Rng& rng);

/// Observation rate mu(t) = base (1 + amp sin(4 pi t)).
double observation_rate(const SimConfig& cfg, double t);
std::vector<double> draw_obs_times(const SimConfig& cfg, Rng& rng);

/// Lower end of Unif(c_lower, 1.05) giving the target censoring proportion
/// under min(1, C*) censoring, by bisection on common random numbers.
double calibrate_censoring(const SimConfig& cfg, double target, int trials, std::uint64_t seed);

/// Censoring proportion of `trials` fresh subjects for a given c_lower.
double empirical_censoring(const SimConfig& cfg, double c_lower, int trials, std::uint64_t seed);

Dataset gen_dataset(const SimConfig& cfg, Rng& rng);

/// Last-value-carried-forward fit of the unweighted sieve likelihood with an
/// outer-product-of-scores sandwich covariance.
FitResult fit_lvcf(const Dataset& data, const FitConfig& config);

enum class StudyMethod { Smkle04, Smkle05, SmkleCv, Lvcf };

StudyMethod parse_method(const std::string& name);
std::string method_name(StudyMethod m);

struct CoefSummary {
    double rb = 0.0;
    double ese = 0.0;
    double se = 0.0;  // NaN with fewer than two usable replicates
    double cp = 0.0;
};

struct MCReport {
    StudyMethod method = StudyMethod::Smkle04;
    std::vector<CoefSummary> coefs;
    int replicates = 0;
    int failures = 0;
    /// Per usable replicate: estimates and standard errors.
    std::vector<Eigen::VectorXd> estimates;
    std::vector<Eigen::VectorXd> std_errors;
};

struct StudyOptions {
    int reps = 1;
    std::vector<StudyMethod> methods{StudyMethod::Smkle04};
    int threads = 1;
    int calibration_trials = 100000;
    BasisConfig basis{3, {1.0 / 3.0, 2.0 / 3.0}, std::nullopt, false};
    int cv_folds = 5;
};

struct StudyReport {
    double c_lower = 0.0;
    std::vector<MCReport> reports;
};

StudyReport run_study(SimConfig cfg, const StudyOptions& options);

/// Table with columns method,coef,RB,ESE,SE,CP,failures.
std::string study_csv(const StudyReport& report);

}  // namespace hazardsieve

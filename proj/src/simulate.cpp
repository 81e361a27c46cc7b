#include "hazardsieve/simulate.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace hazardsieve {

namespace {

constexpr std::uint64_t kCalibrationStream = 0xCA11B8A7E0000001ULL;
constexpr double kCensorUpper = 1.05;

const QuadratureRule& segment_rule()
{
    static const QuadratureRule rule(16);
    return rule;
}

}  // namespace

Rng make_stream(std::uint64_t master, std::uint64_t index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      0x5eedu};
    return Rng(seq);
}

double SimCovariates::z1_at(double t) const
{
    const int k = static_cast<int>(z1_steps.size());
    const int seg = std::clamp(static_cast<int>(std::floor(t * k)), 0, k - 1);
    return z1_steps[seg];
}

Eigen::MatrixXd level_covariance_factor(int segments)
{
    Eigen::MatrixXd cov(segments, segments);
    for (int j = 0; j < segments; ++j) {
        for (int k = 0; k < segments; ++k) cov(j, k) = std::exp(-std::abs(j - k) / 20.0);
    }
    return Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
}

SimCovariates covariates_from_draws(std::span<const double> correlated_normals, double u_star)
{
    SimCovariates c;
    double mean = 0.0;
    for (double z : correlated_normals) {
        const double level = 2.0 * (normal_cdf(z) - 0.5);
        c.z1_steps.push_back(level);
        mean += level;
    }
    mean /= static_cast<double>(correlated_normals.size());
    c.z2 = mean + u_star > 0.0 ? 1 : 0;
    return c;
}

SimCovariates gen_covariates(const SimConfig& cfg, Rng& rng)
{
    if (cfg.segments < 1) throw std::invalid_argument("segments must be >= 1");
    thread_local int cached_segments = 0;
    thread_local Eigen::MatrixXd factor;
    if (cached_segments != cfg.segments) {
        factor = level_covariance_factor(cfg.segments);
        cached_segments = cfg.segments;
    }
    std::normal_distribution<double> normal;
    Eigen::VectorXd iid(cfg.segments);
    for (int k = 0; k < cfg.segments; ++k) iid[k] = normal(rng);
    const Eigen::VectorXd z = factor * iid;
    const double u_star = normal(rng);
    return covariates_from_draws(std::span<const double>(z.data(), static_cast<std::size_t>(z.size())), u_star);
}

double true_alpha(double s, double t)
{
    return 0.75 * ((s + 1.0) / 2.0 + t * (1.0 - std::sin(2.0 * std::numbers::pi * (t - 0.25))));
}

double true_hazard(const SimConfig& cfg, double t, double z1_at_t, int z2)
{
    const double y = true_alpha(cfg.s, t) + cfg.beta1 * z1_at_t + cfg.beta2 * z2;
    double lambda = 0.0;
    if (cfg.s == 0.0) {
        lambda = std::exp(y);
    } else {
        const double base = 1.0 + cfg.s * y;
        if (!(base > 0.0)) throw std::domain_error("nonpositive hazard in the simulation model");
        lambda = std::exp(std::log(base) / cfg.s);
    }
    if (!(lambda > 0.0)) throw std::domain_error("nonpositive hazard in the simulation model");
    return lambda;
}

namespace {

double segment_integral(const SimConfig& cfg, double z1, int z2, double a, double b)
{
    double total = 0.0;
    segment_rule().for_each_node(a, b, [&](double t, double w) { total += w * true_hazard(cfg, t, z1, z2); });
    return total;
}

}  // namespace

double cumulative_hazard(const SimConfig& cfg, const SimCovariates& cov, double t)
{
    const double width = 1.0 / static_cast<double>(cov.z1_steps.size());
    double total = 0.0;
    for (std::size_t k = 0;; ++k) {
        const double a = k * width;
        if (a >= t) break;
        const double b = std::min(t, (k + 1) * width);
        total += segment_integral(cfg, cov.z1_at(a), cov.z2, a, b);
    }
    return total;
}

double invert_cumulative_hazard(const SimConfig& cfg, const SimCovariates& cov, double target)
{
    if (!(target > 0.0)) return 0.0;
    const double width = 1.0 / static_cast<double>(cov.z1_steps.size());
    double cum = 0.0;
    // Beyond t = 1 the path continues with Z1 frozen; the hazard stays bounded
    // below so the search terminates.
    for (std::size_t k = 0; k < 1000000; ++k) {
        const double a = k * width;
        const double b = (k + 1) * width;
        const double z1 = cov.z1_at(a);
        const double piece = segment_integral(cfg, z1, cov.z2, a, b);
        if (cum + piece < target) {
            cum += piece;
            continue;
        }
        double lo = a;
        double hi = b;
        while (hi - lo > 1e-10) {
            const double mid = 0.5 * (lo + hi);
            if (cum + segment_integral(cfg, z1, cov.z2, a, mid) < target) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return 0.5 * (lo + hi);
    }
    return std::numeric_limits<double>::infinity();
}

double draw_failure(const SimConfig& cfg, const SimCovariates& cov, Rng& rng)
{
    std::exponential_distribution<double> expo(1.0);
    return invert_cumulative_hazard(cfg, cov, expo(rng));
}

double observation_rate(const SimConfig& cfg, double t)
{
    return cfg.obs_rate_base * (1.0 + cfg.obs_rate_amp * std::sin(4.0 * std::numbers::pi * t));
}

std::vector<double> draw_obs_times(const SimConfig& cfg, Rng& rng)
{
    const double envelope = cfg.obs_rate_base * (1.0 + std::abs(cfg.obs_rate_amp));
    std::poisson_distribution<int> count(envelope);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int m = count(rng);
    std::vector<double> out;
    for (int k = 0; k < m; ++k) {
        const double t = unif(rng);
        if (unif(rng) * envelope < observation_rate(cfg, t)) out.push_back(t);
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

struct CensorDraws {
    std::vector<double> failure;
    std::vector<double> u;
};

CensorDraws censor_draws(const SimConfig& cfg, int trials, Rng& rng)
{
    CensorDraws d;
    d.failure.reserve(trials);
    d.u.reserve(trials);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < trials; ++i) {
        const auto cov = gen_covariates(cfg, rng);
        d.failure.push_back(draw_failure(cfg, cov, rng));
        d.u.push_back(unif(rng));
    }
    return d;
}

double censoring_rate(const CensorDraws& d, double c_lower)
{
    std::size_t censored = 0;
    for (std::size_t i = 0; i < d.failure.size(); ++i) {
        const double c = std::min(1.0, c_lower + (kCensorUpper - c_lower) * d.u[i]);
        if (d.failure[i] > c) ++censored;
    }
    return static_cast<double>(censored) / static_cast<double>(d.failure.size());
}

}  // namespace

double calibrate_censoring(const SimConfig& cfg, double target, int trials, std::uint64_t seed)
{
    if (!(target > 0.0 && target < 1.0)) throw std::invalid_argument("censoring target must lie in (0, 1)");
    if (trials < 10000) throw std::invalid_argument("calibration needs at least 1e4 trials");
    Rng rng = make_stream(seed, kCalibrationStream);
    const auto draws = censor_draws(cfg, trials, rng);

    // The rate is nonincreasing in c_lower.
    double lo = -1.0;
    double hi = kCensorUpper;
    if (censoring_rate(draws, lo) < target || censoring_rate(draws, hi) > target)
        throw std::domain_error("censoring target unreachable on [-1, 1.05)");
    for (int iter = 0; iter < 60; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (censoring_rate(draws, mid) > target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double c = 0.5 * (lo + hi);
    if (std::abs(censoring_rate(draws, c) - target) > 0.005)
        throw std::domain_error("censoring calibration did not reach the target");
    return c;
}

double empirical_censoring(const SimConfig& cfg, double c_lower, int trials, std::uint64_t seed)
{
    Rng rng = make_stream(seed, kCalibrationStream + 1);
    return censoring_rate(censor_draws(cfg, trials, rng), c_lower);
}

Dataset gen_dataset(const SimConfig& cfg, Rng& rng)
{
    if (!cfg.c_lower) throw std::invalid_argument("censoring lower bound has not been calibrated");
    if (cfg.n < 1) throw std::invalid_argument("n must be >= 1");
    std::uniform_real_distribution<double> unif(*cfg.c_lower, kCensorUpper);
    std::vector<Subject> subjects;
    subjects.reserve(cfg.n);
    for (int i = 0; i < cfg.n; ++i) {
        const auto cov = gen_covariates(cfg, rng);
        const double t = draw_failure(cfg, cov, rng);
        const double c = std::min(1.0, unif(rng));
        Subject s;
        s.id = std::to_string(i + 1);
        s.x = std::min(t, c);
        s.delta = t <= c;
        for (double r : draw_obs_times(cfg, rng)) {
            Measurement m;
            m.time = r;
            m.z = Eigen::Vector2d(cov.z1_at(r), static_cast<double>(cov.z2));
            s.measurements.push_back(std::move(m));
        }
        subjects.push_back(std::move(s));
    }
    return Dataset(std::move(subjects), 2, 1.0);
}

FitResult fit_lvcf(const Dataset& data, const FitConfig& config)
{
    const SplineBasis basis = make_basis(data, config.basis);
    const BoxCoxTransform tr(config.s, config.floor_eps);
    const SieveObjective objective(build_lvcf_design(data, basis, config.quad), tr);
    const SieveParams init = config.init ? *config.init : default_init(data, basis, tr);

    OptimizerOptions opts;
    opts.max_iter = config.max_iter;
    opts.grad_tol = config.grad_tol;
    const auto opt = maximize_lbfgs(
        [&](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) { return objective.value_and_gradient(theta, grad); },
        init.pack(), opts);

    FitResult r;
    r.n = data.size();
    r.basis = basis;
    const auto params = SieveParams::unpack(opt.x, data.p());
    r.beta_hat = params.beta;
    r.gamma_hat = params.gamma;
    r.loglik = opt.value;
    r.converged = opt.converged;
    r.iterations = opt.iterations;
    r.grad_norm = opt.grad_norm;
    r.trace = opt.trace;
    r.barrier_touched = objective.touches_tail(opt.x);
    if (!r.converged) r.warnings.emplace_back("not-converged");
    if (config.compute_variance && r.converged && data.p() > 0) {
        try {
            const auto v = score_sandwich(objective, opt.x, data.p());
            r.covariance = v.covariance;
            r.se = v.se;
        } catch (const EstimationError& e) {
            r.warnings.emplace_back(e.what());
        }
    }
    if (r.se.size() != data.p()) {
        r.covariance = Eigen::MatrixXd::Constant(data.p(), data.p(), std::numeric_limits<double>::quiet_NaN());
        r.se = Eigen::VectorXd::Constant(data.p(), std::numeric_limits<double>::quiet_NaN());
    }
    return r;
}

StudyMethod parse_method(const std::string& name)
{
    if (name == "smkle04") return StudyMethod::Smkle04;
    if (name == "smkle05") return StudyMethod::Smkle05;
    if (name == "smklecv") return StudyMethod::SmkleCv;
    if (name == "lvcf") return StudyMethod::Lvcf;
    throw std::invalid_argument("unknown method '" + name + "'");
}

std::string method_name(StudyMethod m)
{
    switch (m) {
    case StudyMethod::Smkle04: return "smkle04";
    case StudyMethod::Smkle05: return "smkle05";
    case StudyMethod::SmkleCv: return "smklecv";
    case StudyMethod::Lvcf: return "lvcf";
    }
    return "unknown";
}

namespace {

struct ReplicateOutcome {
    bool ok = false;
    Eigen::VectorXd beta;
    Eigen::VectorXd se;
};

ReplicateOutcome run_method(StudyMethod method, const Dataset& data, const SimConfig& cfg,
                            const StudyOptions& options, std::uint64_t cv_seed)
{
    FitConfig fc;
    fc.s = cfg.s;
    fc.basis = options.basis;
    const double n = static_cast<double>(data.size());
    ReplicateOutcome out;
    try {
        FitResult r;
        switch (method) {
        case StudyMethod::Smkle04:
            fc.bandwidth = std::pow(n, -0.4);
            r = fit(data, fc);
            break;
        case StudyMethod::Smkle05:
            fc.bandwidth = std::pow(n, -0.5);
            r = fit(data, fc);
            break;
        case StudyMethod::SmkleCv:
            fc.bandwidth = CvGrid{{}, options.cv_folds, cv_seed};
            r = fit(data, fc);
            break;
        case StudyMethod::Lvcf: {
            // Subjects never measured carry nothing forward.
            std::vector<std::size_t> keep;
            for (std::size_t i = 0; i < data.size(); ++i) {
                if (!data.subject(i).measurements.empty()) keep.push_back(i);
            }
            r = fit_lvcf(keep.size() == data.size() ? data : data.select(keep), fc);
            break;
        }
        }
        out.beta = r.beta_hat;
        out.se = r.se;
        out.ok = r.converged && r.se.allFinite() && (r.se.array() > 0.0).all();
    } catch (const std::exception&) {
        out.ok = false;
    }
    return out;
}

MCReport summarize(StudyMethod method, const std::vector<ReplicateOutcome>& outcomes, const Eigen::Vector2d& truth)
{
    MCReport rep;
    rep.method = method;
    for (const auto& o : outcomes) {
        if (!o.ok) {
            ++rep.failures;
            continue;
        }
        rep.estimates.push_back(o.beta);
        rep.std_errors.push_back(o.se);
    }
    rep.replicates = static_cast<int>(rep.estimates.size());
    const double m = rep.replicates;
    for (int k = 0; k < truth.size(); ++k) {
        CoefSummary c;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        if (rep.replicates == 0) {
            c = {nan, nan, nan, nan};
            rep.coefs.push_back(c);
            continue;
        }
        double sum = 0.0;
        double sum_se = 0.0;
        int covered = 0;
        for (std::size_t r = 0; r < rep.estimates.size(); ++r) {
            const double b = rep.estimates[r][k];
            const double se = rep.std_errors[r][k];
            sum += b;
            sum_se += se;
            if (std::abs(b - truth[k]) <= 1.96 * se) ++covered;
        }
        const double mean = sum / m;
        double ss = 0.0;
        for (const auto& est : rep.estimates) ss += (est[k] - mean) * (est[k] - mean);
        c.rb = (mean - truth[k]) / std::abs(truth[k]);
        c.ese = sum_se / m;
        c.se = rep.replicates > 1 ? std::sqrt(ss / (m - 1.0)) : nan;
        c.cp = 100.0 * covered / m;
        rep.coefs.push_back(c);
    }
    return rep;
}

}  // namespace

StudyReport run_study(SimConfig cfg, const StudyOptions& options)
{
    if (options.reps < 1) throw std::invalid_argument("reps must be >= 1");
    StudyReport report;
    if (!cfg.c_lower) cfg.c_lower = calibrate_censoring(cfg, cfg.censor_target, options.calibration_trials, cfg.seed);
    report.c_lower = *cfg.c_lower;

    const std::size_t reps = static_cast<std::size_t>(options.reps);
    const std::size_t nm = options.methods.size();
    std::vector<std::vector<ReplicateOutcome>> outcomes(nm, std::vector<ReplicateOutcome>(reps));

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    auto worker = [&] {
        for (;;) {
            const std::size_t r = next.fetch_add(1);
            if (r >= reps) return;
            try {
                Rng rng = make_stream(cfg.seed, r);
                const Dataset data = gen_dataset(cfg, rng);
                const std::uint64_t cv_seed = rng();
                for (std::size_t m = 0; m < nm; ++m)
                    outcomes[m][r] = run_method(options.methods[m], data, cfg, options, cv_seed);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    const int threads = std::max(1, std::min<int>(options.threads, options.reps));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);

    const Eigen::Vector2d truth(cfg.beta1, cfg.beta2);
    for (std::size_t m = 0; m < nm; ++m) report.reports.push_back(summarize(options.methods[m], outcomes[m], truth));
    return report;
}

namespace {

std::string sig6(double v)
{
    if (!std::isfinite(v)) return "NA";
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

std::string fixed1(double v)
{
    if (!std::isfinite(v)) return "NA";
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << v;
    return os.str();
}

}  // namespace

std::string study_csv(const StudyReport& report)
{
    std::ostringstream os;
    os << "method,coef,RB,ESE,SE,CP,failures\n";
    for (const auto& rep : report.reports) {
        for (std::size_t k = 0; k < rep.coefs.size(); ++k) {
            const auto& c = rep.coefs[k];
            os << method_name(rep.method) << ",beta" << (k + 1) << ',' << sig6(c.rb) << ',' << sig6(c.ese) << ','
               << sig6(c.se) << ',' << fixed1(c.cp) << ',' << rep.failures << '\n';
        }
    }
    return os.str();
}

}  // namespace hazardsieve

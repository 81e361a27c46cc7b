#include "hazardsieve/estimator.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

namespace hazardsieve {

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double FitResult::alpha(double t) const
{
    if (!basis) throw std::logic_error("fit result has no basis");
    return basis->curve(gamma_hat, t);
}

std::vector<std::pair<double, double>> FitResult::alpha_curve(int points) const
{
    if (!basis) throw std::logic_error("fit result has no basis");
    std::vector<std::pair<double, double>> out;
    const double a = basis->lower();
    const double b = basis->upper();
    for (int k = 0; k < points; ++k) {
        const double t = points == 1 ? a : a + (b - a) * k / (points - 1.0);
        out.emplace_back(t, basis->curve(gamma_hat, t));
    }
    return out;
}

SplineBasis make_basis(const Dataset& data, const BasisConfig& config)
{
    std::vector<double> knots = config.interior_knots;
    if (knots.empty()) {
        const int k = config.num_knots.value_or(default_knot_count(data.size()));
        std::vector<double> xs;
        xs.reserve(data.size());
        for (const auto& s : data.subjects()) xs.push_back(s.x);
        knots = quantile_knots(std::move(xs), k, 0.0, data.tau());
    }
    return SplineBasis(config.order, std::move(knots), {0.0, data.tau()}, config.natural);
}

SieveParams default_init(const Dataset& data, const SplineBasis& basis, const BoxCoxTransform& tr)
{
    const double followup = data.total_followup();
    if (!(followup > 0.0)) throw EstimationError("zero-followup", "total follow-up time is zero");
    const auto events = data.event_count();
    if (events == 0) throw EstimationError("no-events", "cannot initialize without events");
    const double rate = static_cast<double>(events) / followup;
    return {Eigen::VectorXd::Zero(data.p()), tr.g_eval(rate) * basis.constant_coefficients()};
}

std::vector<double> default_cv_grid(std::size_t n)
{
    const double nn = static_cast<double>(n);
    const double lo = 0.5 * std::pow(nn, -0.5);
    const double hi = 4.0 * std::pow(nn, -0.4);
    std::vector<double> grid(8);
    for (int k = 0; k < 8; ++k) grid[k] = lo * std::pow(hi / lo, k / 7.0);
    return grid;
}

FitResult fit_with_basis(const Dataset& data, const FitConfig& config, const SplineBasis& basis, double h)
{
    const BoxCoxTransform tr(config.s, config.floor_eps);
    const SieveObjective objective(build_kernel_design(data, h, basis, config.quad, config.kernel), tr);

    FitResult r;
    r.n = data.size();
    r.h_used = h;
    r.basis = basis;

    const auto& design = objective.design();
    if (design.empty()) {
        // Nothing to fit: the objective is identically zero.
        SieveParams init{Eigen::VectorXd::Zero(data.p()), Eigen::VectorXd::Zero(basis.dim())};
        if (config.init) {
            init = *config.init;
        } else if (data.event_count() > 0 && data.total_followup() > 0.0) {
            init = default_init(data, basis, tr);
        }
        r.beta_hat = init.beta;
        r.gamma_hat = init.gamma;
        r.converged = true;
        return r;
    }
    if (design.event_w.size() == 0)
        throw EstimationError("no-weighted-events", "no event term has positive kernel weight");

    const SieveParams init = config.init ? *config.init : default_init(data, basis, tr);
    if (init.beta.size() != data.p() || init.gamma.size() != basis.dim())
        throw std::invalid_argument("initial parameters have the wrong dimension");

    OptimizerOptions opts;
    opts.max_iter = config.max_iter;
    opts.grad_tol = config.grad_tol;
    const auto opt = maximize_lbfgs(
        [&](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) { return objective.value_and_gradient(theta, grad); },
        init.pack(), opts);

    const auto params = SieveParams::unpack(opt.x, data.p());
    r.beta_hat = params.beta;
    r.gamma_hat = params.gamma;
    r.loglik = opt.value;
    r.converged = opt.converged;
    r.iterations = opt.iterations;
    r.grad_norm = opt.grad_norm;
    r.trace = opt.trace;
    r.barrier_touched = objective.touches_tail(opt.x);
    if (r.barrier_touched) r.warnings.emplace_back("fitted surface evaluates the transform below its positivity floor");
    if (!r.converged) r.warnings.emplace_back("not-converged");

    if (config.compute_variance && r.converged && data.p() > 0) {
        try {
            auto v = sandwich_variance(data, r, basis, tr, config.quad, config.kernel);
            r.covariance = std::move(v.covariance);
            r.se = std::move(v.se);
            r.dropped_variance_terms = v.dropped_terms;
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

FitResult fit(const Dataset& data, const FitConfig& config)
{
    const SplineBasis basis = make_basis(data, config.basis);
    double h = 0.0;
    if (const auto* fixed = std::get_if<double>(&config.bandwidth)) {
        h = *fixed;
        if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");
    } else {
        const auto& cv = std::get<CvGrid>(config.bandwidth);
        h = cv_bandwidth(data, config, cv.grid, cv.folds, cv.seed).chosen_h;
    }
    return fit_with_basis(data, config, basis, h);
}

CVReport cv_bandwidth(const Dataset& data, const FitConfig& config, std::vector<double> grid, int folds,
                      std::uint64_t seed)
{
    if (folds < 2) throw std::invalid_argument("cross-validation needs at least 2 folds");
    if (grid.empty()) grid = default_cv_grid(data.size());
    for (double h : grid) {
        if (!(h > 0.0)) throw std::invalid_argument("bandwidth grid must be positive");
    }
    if (static_cast<std::size_t>(folds) > data.size()) throw std::invalid_argument("more folds than subjects");

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> held(folds);
    for (std::size_t k = 0; k < order.size(); ++k) held[k % folds].push_back(order[k]);
    for (auto& f : held) std::sort(f.begin(), f.end());

    const SplineBasis basis = make_basis(data, config.basis);
    const BoxCoxTransform tr(config.s, config.floor_eps);
    FitConfig train_config = config;
    train_config.compute_variance = false;
    train_config.init.reset();

    CVReport report;
    report.grid = grid;
    report.fold_count = folds;
    report.mean_loss.assign(grid.size(), 0.0);
    constexpr double inf = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double h = grid[g];
        double sum = 0.0;
        for (int f = 0; f < folds; ++f) {
            std::vector<std::size_t> train;
            for (int other = 0; other < folds; ++other) {
                if (other != f) train.insert(train.end(), held[other].begin(), held[other].end());
            }
            std::sort(train.begin(), train.end());
            double loss = inf;
            try {
                const Dataset train_data = data.select(train);
                const auto fitted = fit_with_basis(train_data, train_config, basis, h);
                const Dataset test_data = data.select(held[f]);
                const SieveObjective test(build_kernel_design(test_data, h, basis, config.quad, config.kernel), tr);
                loss = -test.value(SieveParams{fitted.beta_hat, fitted.gamma_hat}.pack());
                if (!std::isfinite(loss)) loss = inf;
            } catch (const EstimationError&) {
                loss = inf;
            }
            sum += loss;
        }
        report.mean_loss[g] = sum / folds;
    }

    // Ties go to the larger bandwidth.
    std::optional<std::size_t> best;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        if (!std::isfinite(report.mean_loss[g])) continue;
        if (!best || report.mean_loss[g] < report.mean_loss[*best] ||
            (report.mean_loss[g] == report.mean_loss[*best] && grid[g] > grid[*best])) {
            best = g;
        }
    }
    if (!best) throw EstimationError("no-weighted-events", "every cross-validation cell failed");
    report.chosen_h = grid[*best];
    return report;
}

namespace {

// At-risk measurement records sorted by measurement time, with covariates
// stored column-wise.
struct RiskTable {
    std::vector<double> r;
    std::vector<double> x;
    std::vector<double> lin;  // beta^T z
    Eigen::MatrixXd z;        // p x records
};

struct RiskSums {
    double s0 = 0.0;
    Eigen::VectorXd s1;
    Eigen::MatrixXd s2;
};

Eigen::MatrixXd solve_sandwich(const Eigen::MatrixXd& xi, const Eigen::MatrixXd& scale_ref, const Eigen::MatrixXd& meat)
{
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(xi, Eigen::EigenvaluesOnly);
    const double ref = std::max(scale_ref.diagonal().cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    const double lo = eig.eigenvalues().cwiseAbs().minCoeff();
    if (!xi.allFinite() || !(lo / ref > 1e-12))
        throw EstimationError("singular-information", "information matrix is numerically singular");
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(xi);
    if (ldlt.info() != Eigen::Success)
        throw EstimationError("singular-information", "information matrix factorization failed");
    const Eigen::MatrixXd left = ldlt.solve(meat);
    Eigen::MatrixXd cov = ldlt.solve(left.transpose());
    return 0.5 * (cov + cov.transpose());
}

}  // namespace

VarianceResult sandwich_variance(const Dataset& data, const FitResult& fit, const SplineBasis& basis,
                                 const BoxCoxTransform& tr, const QuadratureRule& quad, const KernelSpec& kernel)
{
    const int p = data.p();
    const int q = basis.dim();
    const double h = fit.h_used;
    const double n = static_cast<double>(data.size());
    if (fit.beta_hat.size() != p || fit.gamma_hat.size() != q)
        throw std::invalid_argument("fit result does not match data and basis");
    const auto& beta = fit.beta_hat;
    const auto& gamma = fit.gamma_hat;

    const LikelihoodDesign design = build_kernel_design(data, h, basis, quad, kernel);

    RiskTable risk;
    {
        std::vector<std::pair<double, const Measurement*>> recs;
        for (const auto& s : data.subjects()) {
            for (const auto& m : s.measurements) {
                if (m.time > s.x) break;
                recs.emplace_back(s.x, &m);
            }
        }
        std::vector<std::size_t> order(recs.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return recs[a].second->time < recs[b].second->time; });
        risk.z.resize(p, static_cast<Eigen::Index>(recs.size()));
        for (std::size_t k = 0; k < order.size(); ++k) {
            const auto& [x, m] = recs[order[k]];
            risk.r.push_back(m->time);
            risk.x.push_back(x);
            risk.lin.push_back(beta.dot(m->z));
            risk.z.col(static_cast<Eigen::Index>(k)) = m->z;
        }
    }

    // S^(k)(t) with the baseline evaluated at t and each record's own
    // measured covariate.
    RiskSums sums{0.0, Eigen::VectorXd(p), Eigen::MatrixXd(p, p)};
    auto risk_sums = [&](double t, double alpha_t) {
        sums.s0 = 0.0;
        sums.s1.setZero();
        sums.s2.setZero();
        const auto first = std::upper_bound(risk.r.begin(), risk.r.end(), t - h);
        for (auto k = static_cast<std::size_t>(first - risk.r.begin()); k < risk.r.size() && risk.r[k] <= t; ++k) {
            if (risk.x[k] < t) continue;
            const double w = kh_eval(kernel, t - risk.r[k], h);
            if (w == 0.0) continue;
            const double c = w * tr.terms(alpha_t + risk.lin[k]).ratio2 / n;
            const double* zk = risk.z.col(static_cast<Eigen::Index>(k)).data();
            sums.s0 += c;
            for (int a = 0; a < p; ++a) {
                sums.s1[a] += c * zk[a];
                for (int b = 0; b <= a; ++b) sums.s2(a, b) += c * zk[a] * zk[b];
            }
        }
        for (int a = 0; a < p; ++a) {
            for (int b = 0; b < a; ++b) sums.s2(b, a) = sums.s2(a, b);
        }
    };

    VarianceResult v;
    Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(p, p);
    Eigen::MatrixXd xi_raw = Eigen::MatrixXd::Zero(p, p);
    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(p, static_cast<Eigen::Index>(data.size()));

    // Event terms share X_i within a subject.
    int cached_subject = -1;
    RiskSums cached;
    bool cached_ok = false;
    Eigen::VectorXd zbar;
    for (Eigen::Index e = 0; e < design.event_w.size(); ++e) {
        const int i = design.event_subject[e];
        const auto col = design.event_x.col(e);
        if (i != cached_subject) {
            cached_subject = i;
            const double alpha_x = gamma.dot(col.tail(q));
            risk_sums(design.event_time[e], alpha_x);
            cached = sums;
            cached_ok = cached.s0 > 0.0;
            if (cached_ok) zbar = cached.s1 / cached.s0;
        }
        if (!cached_ok) {
            ++v.dropped_terms;
            continue;
        }
        const Eigen::VectorXd z = col.head(p);
        const double eta = beta.dot(z) + gamma.dot(col.tail(q));
        const double ratio1 = tr.terms(eta).ratio1;
        const double w = design.event_w[e];
        const Eigen::MatrixXd second = cached.s2 / cached.s0;
        xi.noalias() += w * ratio1 * ratio1 * (second - zbar * zbar.transpose());
        xi_raw.noalias() += w * ratio1 * ratio1 * second;
        scores.col(i) += w * ratio1 * (zbar - z);
    }
    for (Eigen::Index c = 0; c < design.cum_w.size(); ++c) {
        const auto col = design.cum_x.col(c);
        const double alpha_t = gamma.dot(col.tail(q));
        risk_sums(design.cum_time[c], alpha_t);
        if (!(sums.s0 > 0.0)) {
            ++v.dropped_terms;
            continue;
        }
        const double dh = tr.h_prime(alpha_t + beta.dot(col.head(p)));
        scores.col(design.cum_subject[c]).noalias() -= (design.cum_w[c] * dh) * (sums.s1 / sums.s0 - col.head(p));
    }
    xi /= n;
    xi_raw /= n;
    xi = 0.5 * (xi + xi.transpose());
    const Eigen::MatrixXd omega = (h / n) * (scores * scores.transpose());

    v.xi = xi;
    v.omega = omega;
    v.covariance = solve_sandwich(xi, xi_raw, omega) / (n * h);
    v.se = v.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    return v;
}

VarianceResult score_sandwich(const SieveObjective& objective, const Eigen::VectorXd& theta, int p)
{
    const int d = objective.dim();
    const double n = static_cast<double>(objective.design().n);
    Eigen::MatrixXd hess(d, d);
    Eigen::VectorXd gp;
    Eigen::VectorXd gm;
    for (int k = 0; k < d; ++k) {
        const double step = 1e-5 * std::max(1.0, std::abs(theta[k]));
        Eigen::VectorXd tp = theta;
        Eigen::VectorXd tm = theta;
        tp[k] += step;
        tm[k] -= step;
        objective.value_and_gradient(tp, gp);
        objective.value_and_gradient(tm, gm);
        hess.col(k) = (gp - gm) / (2.0 * step);
    }
    const Eigen::MatrixXd info = -0.5 * (hess + hess.transpose());
    const Eigen::MatrixXd u = objective.subject_scores(theta);
    const Eigen::MatrixXd meat = u * u.transpose() / (n * n);

    VarianceResult v;
    v.xi = info;
    v.omega = meat;
    const Eigen::MatrixXd full = solve_sandwich(info, info, meat);
    v.covariance = full.topLeftCorner(p, p);
    v.se = v.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    return v;
}

std::vector<WaldResult> wald(const FitResult& fit)
{
    if (fit.se.size() != fit.beta_hat.size()) throw std::invalid_argument("standard errors unavailable");
    std::vector<WaldResult> out;
    for (Eigen::Index k = 0; k < fit.beta_hat.size(); ++k) {
        const double se = fit.se[k];
        if (!(se > 0.0)) throw std::invalid_argument("standard error must be positive");
        WaldResult w;
        w.z = fit.beta_hat[k] / se;
        w.p_value = 2.0 * normal_cdf(-std::abs(w.z));
        w.ci_lo = fit.beta_hat[k] - 1.96 * se;
        w.ci_hi = fit.beta_hat[k] + 1.96 * se;
        out.push_back(w);
    }
    return out;
}

double bic(const FitResult& fit, std::size_t n)
{
    const double nn = static_cast<double>(n);
    return -2.0 * nn * fit.loglik + static_cast<double>(fit.p() + fit.q()) * std::log(nn);
}

double cauchy_combine(const std::vector<double>& pvals)
{
    if (pvals.empty()) throw std::invalid_argument("no p-values to combine");
    double t = 0.0;
    for (double p : pvals) {
        if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p-values must lie in (0, 1)");
        t += std::tan((0.5 - p) * std::numbers::pi);
    }
    t /= static_cast<double>(pvals.size());
    return 0.5 - std::atan(t) / std::numbers::pi;
}

}  // namespace hazardsieve

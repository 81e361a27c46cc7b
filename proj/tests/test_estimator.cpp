#include "hazardsieve/estimator.hpp"

#include "helpers.hpp"

#include <doctest.h>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

using namespace hazardsieve;

namespace {

FitConfig study_config(double s, double h)
{
    FitConfig c;
    c.s = s;
    c.bandwidth = h;
    c.basis.interior_knots = {1.0 / 3.0, 2.0 / 3.0};
    return c;
}

Dataset with_covariates(const Dataset& d, const std::function<void(Eigen::VectorXd&)>& edit)
{
    std::vector<Subject> subs = d.subjects();
    for (auto& s : subs) {
        for (auto& m : s.measurements) edit(m.z);
    }
    return Dataset(subs, d.p(), d.tau());
}

Subject make_subject(const std::string& id, double x, bool delta)
{
    Subject s;
    s.id = id;
    s.x = x;
    s.delta = delta;
    return s;
}

}  // namespace

TEST_CASE("default initialization")
{
    std::vector<Subject> subs;
    for (int i = 0; i < 20; ++i) subs.push_back(make_subject(std::to_string(i), 1.0, i < 10));
    const Dataset d(subs, 0, 1.0);
    const auto b = build_basis(3, {1.0 / 3.0, 2.0 / 3.0}, {0.0, 1.0}, false);
    const auto i0 = default_init(d, b, BoxCoxTransform(0.0));
    for (double t : {0.0, 0.4, 1.0}) CHECK(b.curve(i0.gamma, t) == doctest::Approx(std::log(0.5)));
    const auto i1 = default_init(d, b, BoxCoxTransform(1.0));
    for (double t : {0.0, 0.4, 1.0}) CHECK(b.curve(i1.gamma, t) == doctest::Approx(-0.5));

    std::vector<Subject> none;
    for (int i = 0; i < 3; ++i) none.push_back(make_subject(std::to_string(i), 1.0, false));
    try {
        default_init(Dataset(none, 0, 1.0), b, BoxCoxTransform(0.0));
        FAIL("expected an error");
    } catch (const EstimationError& e) {
        CHECK(e.code() == "no-events");
    }
}

TEST_CASE("fit on simulated data")
{
    const auto d = testutil::simulated(0.0, 200, 101);
    const auto r = fit(d, study_config(0.0, std::pow(200.0, -0.4)));
    CHECK(r.converged);
    CHECK(r.grad_norm < 1e-7);
    for (std::size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k] >= r.trace[k - 1]);
    CHECK(r.p() == 2);
    CHECK(r.q() == 5);
    CHECK(r.covariance.isApprox(r.covariance.transpose(), 0.0));
    CHECK((r.covariance.diagonal().array() >= 0.0).all());
    CHECK(r.se[0] == doctest::Approx(std::sqrt(r.covariance(0, 0))));
    CHECK(std::abs(r.beta_hat[0] - 1.0) < 1.0);
    const auto curve = r.alpha_curve(101);
    REQUIRE(curve.size() == 101);
    CHECK(curve.front().first == 0.0);
    CHECK(curve.back().first == doctest::Approx(d.tau()));
    CHECK(curve[50].second == doctest::Approx(r.alpha(curve[50].first)));
}

TEST_CASE("empty objective returns the initial value")
{
    std::vector<Subject> subs;
    for (int i = 0; i < 3; ++i) {
        auto s = make_subject(std::to_string(i), 0.4, false);
        s.measurements.push_back({0.6, Eigen::VectorXd::Ones(1)});
        subs.push_back(s);
    }
    const Dataset d(subs, 1, 1.0);
    const auto r = fit(d, study_config(0.5, 0.2));
    CHECK(r.converged);
    CHECK(r.grad_norm == 0.0);
    CHECK(r.beta_hat.isZero(0.0));
}

TEST_CASE("no weighted events")
{
    std::vector<Subject> subs;
    for (int i = 0; i < 3; ++i) {
        auto s = make_subject(std::to_string(i), 0.9, true);
        s.measurements.push_back({0.1, Eigen::VectorXd::Constant(1, i)});
        subs.push_back(s);
    }
    const Dataset d(subs, 1, 1.0);
    try {
        fit(d, study_config(0.0, 0.1));
        FAIL("expected an error");
    } catch (const EstimationError& e) {
        CHECK(e.code() == "no-weighted-events");
    }
}

TEST_CASE("covariate shift equivariance")
{
    const auto d = testutil::simulated(0.0, 200, 7);
    const Eigen::Vector2d c(0.8, -0.3);
    const auto ds = with_covariates(d, [&](Eigen::VectorXd& z) { z += c; });
    auto cfg = study_config(0.0, std::pow(200.0, -0.4));
    cfg.grad_tol = 1e-10;
    cfg.compute_variance = false;
    const auto a = fit(d, cfg);
    const auto b = fit(ds, cfg);
    CHECK((a.beta_hat - b.beta_hat).cwiseAbs().maxCoeff() < 1e-6);
    for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) CHECK(std::abs(b.alpha(t) - (a.alpha(t) - a.beta_hat.dot(c))) < 1e-6);
}

TEST_CASE("scale equivariance")
{
    const auto d = testutil::simulated(1.0, 200, 9);
    const double c = 2.5;
    const auto ds = with_covariates(d, [&](Eigen::VectorXd& z) { z[0] *= c; });
    // Both fits reach the barrier tail, where gradients stall near 1e-7.
    const auto cfg = study_config(1.0, std::pow(200.0, -0.4));
    const auto a = fit(d, cfg);
    const auto b = fit(ds, cfg);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    CHECK(b.beta_hat[0] == doctest::Approx(a.beta_hat[0] / c).epsilon(1e-5));
    CHECK(b.beta_hat[1] == doctest::Approx(a.beta_hat[1]).epsilon(1e-5));
    CHECK(b.se[0] == doctest::Approx(a.se[0] / c).epsilon(1e-5));
    CHECK(b.se[1] == doctest::Approx(a.se[1]).epsilon(1e-5));
}

TEST_CASE("sandwich pieces")
{
    const auto d = testutil::simulated(0.5, 150, 23);
    const auto cfg = study_config(0.5, 0.2);
    const auto r = fit(d, cfg);
    REQUIRE(r.converged);
    const auto v = sandwich_variance(d, r, *r.basis, BoxCoxTransform(0.5), cfg.quad);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(v.omega);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10 * v.omega.trace());
    CHECK(v.covariance == v.covariance.transpose());
    CHECK((v.covariance.diagonal().array() >= 0.0).all());
    // Direct assembly of the sandwich from its parts.
    const Eigen::MatrixXd xi_inv = v.xi.inverse();
    const Eigen::MatrixXd direct = xi_inv * v.omega * xi_inv / (150.0 * 0.2);
    CHECK((direct - v.covariance).cwiseAbs().maxCoeff() < 1e-10 * direct.cwiseAbs().maxCoeff());
}

TEST_CASE("constant covariate makes the information singular")
{
    const auto base = testutil::simulated(0.0, 120, 5);
    std::vector<Subject> subs = base.subjects();
    for (auto& s : subs) {
        for (auto& m : s.measurements) m.z = Eigen::VectorXd::Ones(1);
    }
    const Dataset d(subs, 1, base.tau());
    auto cfg = study_config(0.0, 0.2);
    cfg.compute_variance = false;
    const auto r = fit(d, cfg);
    try {
        sandwich_variance(d, r, *r.basis, BoxCoxTransform(0.0), cfg.quad);
        FAIL("expected singular-information");
    } catch (const EstimationError& e) {
        CHECK(e.code() == "singular-information");
    }
    cfg.compute_variance = true;
    const auto r2 = fit(d, cfg);
    CHECK(std::isnan(r2.se[0]));
}

TEST_CASE("cross-validation")
{
    const auto d = testutil::simulated(0.0, 120, 44);
    auto cfg = study_config(0.0, 0.2);
    const auto one = cv_bandwidth(d, cfg, {0.2}, 3, 1);
    CHECK(one.chosen_h == 0.2);
    const auto a = cv_bandwidth(d, cfg, {}, 4, 99);
    const auto b = cv_bandwidth(d, cfg, {}, 4, 99);
    CHECK(a.mean_loss == b.mean_loss);
    CHECK(a.chosen_h == b.chosen_h);
    CHECK(a.grid == default_cv_grid(120));
    CHECK(a.fold_count == 4);
    const auto best = std::min_element(a.mean_loss.begin(), a.mean_loss.end());
    CHECK(a.mean_loss[std::find(a.grid.begin(), a.grid.end(), a.chosen_h) - a.grid.begin()] == *best);
    CHECK_THROWS(cv_bandwidth(d, cfg, {0.2}, 1, 1));
    CHECK_THROWS(cv_bandwidth(d, cfg, {-0.2}, 3, 1));

    const auto g = default_cv_grid(200);
    CHECK(g.size() == 8);
    CHECK(g.front() == doctest::Approx(0.5 / std::sqrt(200.0)));
    CHECK(g.back() == doctest::Approx(4.0 * std::pow(200.0, -0.4)));

    cfg.bandwidth = CvGrid{{0.15, 0.3}, 3, 5};
    const auto r = fit(d, cfg);
    CHECK((r.h_used == 0.15 || r.h_used == 0.3));
}

TEST_CASE("Wald, BIC and p-value combination")
{
    FitResult r;
    r.beta_hat = Eigen::Vector2d(0.0, 1.96);
    r.se = Eigen::Vector2d(0.5, 1.0);
    const auto w = wald(r);
    CHECK(w[0].p_value == doctest::Approx(1.0));
    CHECK(w[1].p_value == doctest::Approx(0.05).epsilon(1e-3));
    CHECK(w[1].ci_lo == doctest::Approx(0.0));
    CHECK(w[1].ci_hi == doctest::Approx(3.92));
    r.se[0] = 0.0;
    CHECK_THROWS(wald(r));

    r.loglik = -1.0;
    r.gamma_hat = Eigen::VectorXd::Zero(4);
    CHECK(bic(r, 100) == doctest::Approx(200.0 + 6.0 * std::log(100.0)));
    CHECK(bic(r, 100) == doctest::Approx(227.63).epsilon(1e-4));
    FitResult bigger = r;
    bigger.gamma_hat = Eigen::VectorXd::Zero(5);
    CHECK(bic(bigger, 100) - bic(r, 100) == doctest::Approx(std::log(100.0)));

    CHECK(cauchy_combine({0.5, 0.5, 0.5}) == doctest::Approx(0.5));
    CHECK(cauchy_combine({0.03}) == doctest::Approx(0.03).epsilon(1e-12));
    CHECK(cauchy_combine({0.1, 0.02, 0.6}) == doctest::Approx(cauchy_combine({0.6, 0.1, 0.02})).epsilon(1e-14));
    CHECK_THROWS(cauchy_combine({}));
    CHECK_THROWS(cauchy_combine({0.0, 0.5}));
    CHECK_THROWS(cauchy_combine({1.0}));
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
    CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
}

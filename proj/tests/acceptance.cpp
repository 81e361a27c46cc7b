// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include "hazardsieve/estimator.hpp"
#include "hazardsieve/simulate.hpp"

#include "helpers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace hazardsieve;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const Outcome& o, double secs)
{
    if (!o.pass) ++failures;
    std::printf("criterion %d [%s] %s: %s (%.1fs)\n", id, o.pass ? "PASS" : "FAIL", title.c_str(), o.detail.c_str(),
                secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, double a)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

SieveParams random_params(std::mt19937_64& rng, int p, int q)
{
    std::normal_distribution<double> g(0.0, 0.3);
    SieveParams th{Eigen::VectorXd(p), Eigen::VectorXd(q)};
    for (int k = 0; k < p; ++k) th.beta[k] = g(rng);
    for (int k = 0; k < q; ++k) th.gamma[k] = g(rng);
    return th;
}

Outcome gradient_check()
{
    std::mt19937_64 rng(1001);
    const QuadratureRule quad(16);
    double worst = 0.0;
    for (int draw = 0; draw < 100; ++draw) {
        const int n = 3 + draw % 8;
        const int p = 1 + draw % 2;
        const int order = 2 + draw % 3;
        const int interior = std::min(6 - order, 1 + draw % 3);
        std::vector<double> knots;
        for (int k = 1; k <= interior; ++k) knots.push_back(static_cast<double>(k) / (interior + 1));
        const auto basis = build_basis(order, knots, {0.0, 1.0}, false);
        const auto data = testutil::random_dataset(rng, n, p);
        const BoxCoxTransform tr(0.25 * (draw % 5));
        const double h = 0.15 + 0.05 * (draw % 6);
        const auto th = random_params(rng, p, basis.dim());
        const Eigen::VectorXd g = loglik_grad(th, data, h, basis, tr, quad);
        const Eigen::VectorXd x = th.pack();
        Eigen::VectorXd fd(x.size());
        for (int k = 0; k < x.size(); ++k) {
            Eigen::VectorXd a = x;
            Eigen::VectorXd b = x;
            a[k] += 1e-5;
            b[k] -= 1e-5;
            fd[k] = (loglik(SieveParams::unpack(a, p), data, h, basis, tr, quad) -
                     loglik(SieveParams::unpack(b, p), data, h, basis, tr, quad)) /
                    2e-5;
        }
        const double scale = g.cwiseAbs().maxCoeff();
        if (scale == 0.0) continue;
        worst = std::max(worst, (fd - g).cwiseAbs().maxCoeff() / scale);
    }
    return {worst < 1e-6, "max relative error " + fmt("%.3g", worst) + " over 100 draws (< 1e-6)"};
}

Outcome oracle_check()
{
    std::mt19937_64 rng(2002);
    const QuadratureRule quad(16);
    const auto basis = build_basis(3, {1.0 / 3.0, 2.0 / 3.0}, {0.0, 1.0}, false);
    const double svals[] = {0.0, 0.25, 0.5, 0.75, 1.0};
    double worst = 0.0;
    for (int draw = 0; draw < 20; ++draw) {
        const auto data = testutil::random_dataset(rng, 4 + draw % 5, 1 + draw % 2);
        const BoxCoxTransform tr(svals[draw % 5]);
        const auto th = random_params(rng, data.p(), basis.dim());
        const double h = 0.2 + 0.02 * draw;
        worst = std::max(worst, std::abs(loglik(th, data, h, basis, tr, quad) - loglik_oracle(th, data, h, basis, tr)));
    }
    return {worst < 1e-8, "max |loglik - oracle| " + fmt("%.3g", worst) + " over 20 datasets (< 1e-8)"};
}

StudyReport study(double s, int n, int reps, std::vector<StudyMethod> methods, std::uint64_t seed)
{
    SimConfig cfg;
    cfg.s = s;
    cfg.n = n;
    cfg.censor_target = 0.2;
    cfg.seed = seed;
    StudyOptions o;
    o.reps = reps;
    o.methods = std::move(methods);
    o.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return run_study(cfg, o);
}

const MCReport& find(const StudyReport& r, StudyMethod m)
{
    for (const auto& x : r.reports) {
        if (x.method == m) return x;
    }
    throw std::logic_error("method missing from report");
}

std::string coef_summary(const MCReport& r)
{
    const auto& c = r.coefs[0];
    std::ostringstream os;
    os << method_name(r.method) << " beta1 RB " << fmt("%.4f", c.rb) << ", CP " << fmt("%.1f", c.cp) << ", ESE "
       << fmt("%.4f", c.ese) << ", SE " << fmt("%.4f", c.se) << ", usable " << r.replicates << ", failures "
       << r.failures;
    return os.str();
}

Outcome table_cell(const MCReport& r)
{
    const auto& c = r.coefs[0];
    const bool ok = std::abs(c.rb) <= 0.10 && c.cp >= 89.0 && c.cp <= 97.0;
    return {ok, coef_summary(r) + " (need |RB| <= 0.10, CP in [89, 97])"};
}

Outcome cauchy_check()
{
    const double nc = cauchy_combine({0.085, 0.021, 0.005, 0.002, 0.052});
    const double resp = cauchy_combine({0.532, 0.061, 0.009, 0.105, 0.107});
    const bool ok_nc = std::abs(nc - 0.006) <= 0.0005;
    const bool ok_resp = std::abs(resp - 0.035) <= 0.0005;
    return {ok_nc && ok_resp, "NC " + fmt("%.6f", nc) + (ok_nc ? " ok" : " off") + " (0.006 +- 0.0005), Resp " +
                                  fmt("%.6f", resp) + (ok_resp ? " ok" : " off") + " (0.035 +- 0.0005)"};
}

Outcome censoring_check()
{
    std::string detail;
    bool ok = true;
    for (double s : {0.0, 1.0}) {
        SimConfig cfg;
        cfg.s = s;
        for (double target : {0.2, 0.3}) {
            const double c = calibrate_censoring(cfg, target, 100000, 31);
            const double rate = empirical_censoring(cfg, c, 100000, 97);
            ok = ok && std::abs(rate - target) <= 0.01;
            detail += "s=" + fmt("%g", s) + " target " + fmt("%.1f", target) + ": c_lower " + fmt("%.4f", c) +
                      " rate " + fmt("%.4f", rate) + "; ";
        }
    }
    return {ok, detail + "(need target +- 0.01)"};
}

// Condensed versions of the property suites.
Outcome property_check()
{
    std::vector<std::string> failed;
    auto expect = [&](bool cond, const std::string& name) {
        if (!cond) failed.push_back(name);
    };
    std::mt19937_64 rng(4004);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    // Kernel.
    const KernelSpec k;
    const QuadratureRule gl(16);
    bool sym = true;
    for (int i = 0; i < 1000; ++i) {
        const double v = 3.0 * u(rng) - 1.5;
        sym = sym && k_eval(k, v) == k_eval(k, -v);
    }
    expect(sym, "kernel symmetry");
    expect(std::abs(gl.integrate([&](double v) { return k_eval(k, v); }, -1, 1) - 1.0) < 1e-10, "kernel mass");
    expect(std::abs(gl.integrate([&](double d) { return kh_eval(k, d, 0.3); }, 0, 0.3) - 1.0) < 1e-10,
           "half-window mass");

    // Spline partition of unity.
    const auto basis = build_basis(3, {1.0 / 3.0, 2.0 / 3.0}, {0.0, 1.0}, false);
    bool pu = true;
    for (int i = 0; i < 1000; ++i) pu = pu && std::abs(basis.eval(u(rng)).sum() - 1.0) < 1e-12;
    expect(pu, "partition of unity");

    // Transform monotonicity and positivity.
    bool mono = true;
    bool pos = true;
    for (double s : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const BoxCoxTransform tr(s);
        for (int i = 0; i < 1000; ++i) {
            double a = 100.0 * u(rng) - 50.0;
            double b = 100.0 * u(rng) - 50.0;
            if (a > b) std::swap(a, b);
            if (a < b) mono = mono && tr.h_eval(a) < tr.h_eval(b);
        }
        for (double y : {-1e6, -1e3, -1.0, 0.0, 1e3, 1e6}) pos = pos && tr.h_eval(y) > 0.0;
    }
    expect(mono, "transform monotonicity");
    expect(pos, "transform positivity");

    // Covariate shift and scale equivariance of the fit.
    const auto d = testutil::simulated(1.0, 200, 606);
    FitConfig cfg;
    cfg.s = 1.0;
    cfg.bandwidth = std::pow(200.0, -0.4);
    cfg.basis.interior_knots = {1.0 / 3.0, 2.0 / 3.0};
    const auto base = fit(d, cfg);
    std::vector<Subject> shifted = d.subjects();
    std::vector<Subject> scaled = d.subjects();
    const Eigen::Vector2d c(0.5, -0.2);
    for (auto& s : shifted) {
        for (auto& m : s.measurements) m.z += c;
    }
    for (auto& s : scaled) {
        for (auto& m : s.measurements) m.z[0] *= 3.0;
    }
    const auto fs = fit(Dataset(shifted, 2, 1.0), cfg);
    const auto fc = fit(Dataset(scaled, 2, 1.0), cfg);
    expect(base.converged && fs.converged && fc.converged, "equivariance fits converge");
    bool shift_ok = (fs.beta_hat - base.beta_hat).cwiseAbs().maxCoeff() < 1e-6;
    for (double t : {0.0, 0.5, 1.0}) shift_ok = shift_ok && std::abs(fs.alpha(t) - base.alpha(t) + base.beta_hat.dot(c)) < 1e-6;
    expect(shift_ok, "covariate-shift equivariance");
    const bool scale_ok = std::abs(fc.beta_hat[0] * 3.0 / base.beta_hat[0] - 1.0) < 1e-5 &&
                          std::abs(fc.se[0] * 3.0 / base.se[0] - 1.0) < 1e-5;
    expect(scale_ok, "scale equivariance");

    // PIT of failure-time draws.
    SimConfig sc;
    sc.s = 0.5;
    auto srng = make_stream(505, 0);
    std::vector<double> pit;
    for (int i = 0; i < 100000; ++i) {
        const auto cov = gen_covariates(sc, srng);
        pit.push_back(1.0 - std::exp(-cumulative_hazard(sc, cov, draw_failure(sc, cov, srng))));
    }
    std::sort(pit.begin(), pit.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < pit.size(); ++i) {
        ks = std::max({ks, pit[i] - static_cast<double>(i) / pit.size(), static_cast<double>(i + 1) / pit.size() - pit[i]});
    }
    expect(ks < 0.01, "failure-time PIT");

    // Determinism under a fixed seed.
    SimConfig dc;
    dc.n = 60;
    dc.seed = 9;
    StudyOptions o;
    o.reps = 3;
    o.methods = {StudyMethod::Smkle04, StudyMethod::Lvcf};
    o.calibration_trials = 10000;
    o.threads = 1;
    const auto r1 = study_csv(run_study(dc, o));
    o.threads = 2;
    const auto r2 = study_csv(run_study(dc, o));
    expect(r1 == r2, "determinism");

    std::string detail = "kernel, spline, transform, equivariance, PIT (KS " + fmt("%.4f", ks) + "), determinism";
    if (!failed.empty()) {
        detail += "; failed:";
        for (const auto& f : failed) detail += " " + f;
    }
    return {failed.empty(), detail};
}

}  // namespace

int main()
{
    const auto start = Clock::now();
    std::printf("acceptance criteria\n");

    auto t0 = Clock::now();
    auto o = gradient_check();
    double secs = seconds_since(t0);
    o.pass = o.pass && secs < 30.0;
    report(1, "gradient vs central differences", o, secs);

    t0 = Clock::now();
    o = oracle_check();
    secs = seconds_since(t0);
    o.pass = o.pass && secs < 60.0;
    report(2, "quadrature vs adaptive oracle", o, secs);

    t0 = Clock::now();
    const auto additive = study(1.0, 200, 200, {StudyMethod::Smkle04}, 20240301);
    const double additive_secs = seconds_since(t0);
    o = table_cell(find(additive, StudyMethod::Smkle04));
    o.pass = o.pass && additive_secs < 1800.0;
    o.detail += ", c_lower " + fmt("%.4f", additive.c_lower);
    report(3, "additive model s=1 n=200", o, additive_secs);

    t0 = Clock::now();
    const auto ph = study(0.0, 200, 200, {StudyMethod::Smkle04}, 20240302);
    secs = seconds_since(t0);
    o = table_cell(find(ph, StudyMethod::Smkle04));
    o.detail += ", c_lower " + fmt("%.4f", ph.c_lower);
    report(4, "proportional hazards s=0 n=200", o, secs);

    {
        const auto& c = find(additive, StudyMethod::Smkle04).coefs[0];
        const double ratio = c.se / c.ese;
        report(5, "SE/ESE calibration", {ratio >= 0.80 && ratio <= 1.20,
                                         "mean(se)/sd(beta1) " + fmt("%.3f", ratio) + " (need [0.80, 1.20]), ESE/SE " +
                                             fmt("%.3f", c.ese / c.se)},
               0.0);
    }

    t0 = Clock::now();
    const auto lv = study(0.0, 400, 200, {StudyMethod::Smkle04, StudyMethod::Lvcf}, 20240303);
    {
        const auto& l = find(lv, StudyMethod::Lvcf);
        const auto& k = find(lv, StudyMethod::Smkle04);
        const double rb_l = l.coefs[0].rb;
        const double rb_k = k.coefs[0].rb;
        const bool ok = rb_l >= -0.20 && rb_l <= -0.05 && std::abs(rb_l) > std::abs(rb_k);
        const double secs6 = seconds_since(t0);
        report(6, "LVCF bias s=0 n=400",
               {ok, coef_summary(l) + "; " + coef_summary(k) + " (need LVCF RB in [-0.20, -0.05], |RB_LVCF| > |RB_SMKLE|)"},
               secs6);
    }

    t0 = Clock::now();
    o = cauchy_check();
    report(7, "Cauchy combination", o, seconds_since(t0));

    t0 = Clock::now();
    o = censoring_check();
    report(8, "censoring calibration", o, seconds_since(t0));

    t0 = Clock::now();
    o = property_check();
    secs = seconds_since(t0);
    const double total = seconds_since(start);
    o.pass = o.pass && total < 600.0;
    o.detail += ", acceptance total " + fmt("%.0f", total) + "s (< 600s)";
    report(9, "property suites", o, secs);

    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}

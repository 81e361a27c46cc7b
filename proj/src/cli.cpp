#include "hazardsieve/cli.hpp"

#include "hazardsieve/dataset.hpp"
#include "hazardsieve/estimator.hpp"
#include "hazardsieve/simulate.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace hazardsieve {

namespace {

using json = nlohmann::ordered_json;

// Exit codes.
constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kNotConverged = 2;

class InputError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

json num(double v)
{
    if (!std::isfinite(v)) return nullptr;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::strtod(buf, nullptr);
}

json num_array(const Eigen::VectorXd& v)
{
    json a = json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(num(v[k]));
    return a;
}

std::string fmt6(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::vector<std::string> split(const std::string& text, char sep)
{
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream is(text);
    while (std::getline(is, cur, sep)) {
        const auto b = cur.find_first_not_of(" \t");
        const auto e = cur.find_last_not_of(" \t");
        if (b == std::string::npos) throw InputError("empty entry in list '" + text + "'");
        parts.push_back(cur.substr(b, e - b + 1));
    }
    if (parts.empty()) throw InputError("empty list");
    return parts;
}

double parse_number(const std::string& token)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(token, &used);
    } catch (const std::exception&) {
        throw InputError("not a number: '" + token + "'");
    }
    if (used != token.size()) throw InputError("not a number: '" + token + "'");
    return v;
}

// Accepts decimals and fractions such as 1/3.
std::vector<double> parse_list(const std::string& text)
{
    std::vector<double> out;
    for (const auto& tok : split(text, ',')) {
        const auto slash = tok.find('/');
        if (slash == std::string::npos) {
            out.push_back(parse_number(tok));
        } else {
            const double den = parse_number(tok.substr(slash + 1));
            if (den == 0.0) throw InputError("zero denominator in '" + tok + "'");
            out.push_back(parse_number(tok.substr(0, slash)) / den);
        }
    }
    return out;
}

struct SeedOption {
    std::uint64_t value = 1;

    void add(CLI::App* cmd) { cmd->add_option("--seed", value, "Master seed (HAZARDSIEVE_SEED overrides)"); }

    [[nodiscard]] std::uint64_t resolve() const
    {
        const char* env = std::getenv("HAZARDSIEVE_SEED");
        if (env == nullptr || *env == '\0') return value;
        char* end = nullptr;
        errno = 0;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (errno != 0 || *end != '\0' || *env == '-') throw InputError("HAZARDSIEVE_SEED is not an unsigned integer");
        return v;
    }
};

struct BasisOptions {
    int order = 3;
    std::string interior;
    std::optional<int> num_knots;
    bool natural = false;

    void add(CLI::App* cmd)
    {
        cmd->add_option("--spline-order", order, "B-spline order (degree + 1)")->check(CLI::PositiveNumber);
        auto* knots = cmd->add_option("--interior-knots", interior, "Interior knots, e.g. \"1/3,2/3\"");
        cmd->add_option("--num-knots", num_knots, "Number of quantile knots of observed times")
            ->check(CLI::PositiveNumber)
            ->excludes(knots);
        cmd->add_flag("--natural", natural, "Natural spline constraint (order >= 4)");
    }

    [[nodiscard]] BasisConfig config() const
    {
        BasisConfig b;
        b.order = order;
        if (!interior.empty()) b.interior_knots = parse_list(interior);
        b.num_knots = num_knots;
        b.natural = natural;
        return b;
    }
};

struct DataOptions {
    std::string survival;
    std::string longitudinal;
    bool rescale = false;

    void add(CLI::App* cmd)
    {
        cmd->add_option("--survival", survival, "CSV with columns id,time,status")->required();
        cmd->add_option("--longitudinal", longitudinal, "CSV with columns id,obs_time,z1..zp")->required();
        cmd->add_flag("--rescale-time", rescale, "Divide all times by the largest follow-up");
    }

    [[nodiscard]] Dataset load() const
    {
        Dataset d = load_dataset(survival, longitudinal);
        return rescale ? rescale_time(d) : d;
    }
};

// Flags as parsed, for the manifest.
json flag_record(const CLI::App* cmd)
{
    json flags = json::object();
    for (const auto* opt : cmd->get_options()) {
        if (opt->get_name() == "--help" || opt->get_name().empty()) continue;
        if (opt->count() == 0) continue;
        const auto& res = opt->results();
        if (res.size() == 1) {
            flags[opt->get_name()] = res.front();
        } else {
            flags[opt->get_name()] = res;
        }
    }
    return flags;
}

class Manifest {
public:
    Manifest(std::string command, const CLI::App* cmd)
        : start_(std::chrono::steady_clock::now())
    {
        doc_["command"] = std::move(command);
        doc_["flags"] = flag_record(cmd);
        doc_["version"] = kVersion;
    }

    void set(const std::string& key, json value) { doc_[key] = std::move(value); }

    // Written to `path` if nonempty, else one line on `err`.
    void emit(const std::string& path, std::ostream& err)
    {
        doc_["wall_seconds"] = num(std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count());
        if (path.empty()) {
            err << "manifest: " << doc_.dump() << '\n';
            return;
        }
        std::ofstream f(path);
        if (!f) throw InputError("cannot write manifest " + path);
        f << doc_.dump(2) << '\n';
    }

private:
    std::chrono::steady_clock::time_point start_;
    json doc_;
};

json fit_json(const FitResult& r, double s)
{
    json j;
    Eigen::VectorXd z(r.p()), pv(r.p()), lo(r.p()), hi(r.p());
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    for (int k = 0; k < r.p(); ++k) {
        const double se = r.se.size() == r.p() ? r.se[k] : nan;
        if (std::isfinite(se) && se > 0.0) {
            z[k] = r.beta_hat[k] / se;
            pv[k] = 2.0 * normal_cdf(-std::abs(z[k]));
            lo[k] = r.beta_hat[k] - 1.96 * se;
            hi[k] = r.beta_hat[k] + 1.96 * se;
        } else {
            z[k] = pv[k] = lo[k] = hi[k] = nan;
        }
    }
    j["s"] = num(s);
    j["beta"] = num_array(r.beta_hat);
    j["se"] = num_array(r.se);
    j["z"] = num_array(z);
    j["p"] = num_array(pv);
    j["ci_lo"] = num_array(lo);
    j["ci_hi"] = num_array(hi);
    j["loglik"] = num(r.loglik);
    j["bic"] = num(bic(r, r.n));
    j["h_used"] = num(r.h_used);
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
    j["grad_norm"] = num(r.grad_norm);
    j["barrier_touched"] = r.barrier_touched;
    j["gamma"] = num_array(r.gamma_hat);
    if (r.basis) {
        json knots = json::array();
        for (double k : r.basis->interior_knots()) knots.push_back(num(k));
        j["interior_knots"] = knots;
    }
    json t = json::array();
    json a = json::array();
    for (const auto& [ti, ai] : r.alpha_curve(101)) {
        t.push_back(num(ti));
        a.push_back(num(ai));
    }
    j["alpha_curve"] = {{"t", t}, {"alpha", a}};
    j["warnings"] = r.warnings;
    return j;
}

double censor_target(double c)
{
    if (!(c > 0.0 && c < 1.0)) throw InputError("--censor must be in (0, 1)");
    return c;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Kernel-weighted sieve estimation for transformed hazards models with sparse longitudinal covariates",
                 "hazardsieve"};
    app.set_help_flag("--help", "Print this help message and exit");
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "Fit the model and print estimates as JSON");
    DataOptions fit_data;
    BasisOptions fit_basis;
    SeedOption fit_seed;
    double fit_s = 0.0;
    std::string fit_s_grid;
    std::optional<double> fit_h;
    bool fit_cv = false;
    std::string fit_grid;
    int fit_folds = 5;
    std::string fit_kernel = "epanechnikov";
    std::string fit_manifest;
    int fit_max_iter = 500;
    fit_data.add(fit_cmd);
    fit_basis.add(fit_cmd);
    fit_seed.add(fit_cmd);
    auto* s_opt = fit_cmd->add_option("--s", fit_s, "Box-Cox parameter (0: proportional, 1: additive)")
                      ->check(CLI::NonNegativeNumber);
    fit_cmd->add_option("--s-grid", fit_s_grid, "Fit each s in a list, e.g. \"0,0.25,0.5,0.75,1\"")->excludes(s_opt);
    auto* h_opt = fit_cmd->add_option("--h", fit_h, "Fixed bandwidth")->check(CLI::PositiveNumber);
    auto* cv_opt = fit_cmd->add_flag("--cv", fit_cv, "Choose the bandwidth by cross-validation")->excludes(h_opt);
    fit_cmd->add_option("--grid", fit_grid, "Bandwidth grid for --cv")->needs(cv_opt);
    fit_cmd->add_option("--folds", fit_folds, "Cross-validation folds")->needs(cv_opt)->check(CLI::Range(2, 1000000));
    fit_cmd->add_option("--kernel", fit_kernel, "Kernel family");
    fit_cmd->add_option("--max-iter", fit_max_iter, "Optimizer iteration cap")->check(CLI::PositiveNumber);
    fit_cmd->add_option("--manifest", fit_manifest, "Write the run manifest here instead of stderr");

    // cv
    auto* cv_cmd = app.add_subcommand("cv", "Cross-validated bandwidth selection");
    DataOptions cv_data;
    BasisOptions cv_basis;
    SeedOption cv_seed;
    double cv_s = 0.0;
    std::string cv_grid;
    int cv_folds = 5;
    std::string cv_kernel = "epanechnikov";
    std::string cv_manifest;
    cv_data.add(cv_cmd);
    cv_basis.add(cv_cmd);
    cv_seed.add(cv_cmd);
    cv_cmd->add_option("--s", cv_s, "Box-Cox parameter")->check(CLI::NonNegativeNumber);
    cv_cmd->add_option("--grid", cv_grid, "Bandwidth grid (default: 8 geometric points)");
    cv_cmd->add_option("--folds", cv_folds, "Folds")->check(CLI::Range(2, 1000000));
    cv_cmd->add_option("--kernel", cv_kernel, "Kernel family");
    cv_cmd->add_option("--manifest", cv_manifest, "Write the run manifest here instead of stderr");

    // validate
    auto* val_cmd = app.add_subcommand("validate", "Summarize a dataset as JSON");
    DataOptions val_data;
    double val_h = 0.1;
    val_data.add(val_cmd);
    val_cmd->add_option("--h", val_h, "Bandwidth for the zero-weight event check")->check(CLI::PositiveNumber);

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a dataset from the simulation design");
    SeedOption sim_seed;
    double sim_s = 0.0;
    int sim_n = 200;
    double sim_censor = 0.2;
    int sim_trials = 100000;
    std::string sim_out;
    std::string sim_manifest;
    sim_seed.add(sim_cmd);
    sim_cmd->add_option("--s", sim_s, "Box-Cox parameter")->check(CLI::NonNegativeNumber);
    sim_cmd->add_option("--n", sim_n, "Subjects")->check(CLI::PositiveNumber);
    sim_cmd->add_option("--censor", sim_censor, "Target censoring proportion");
    sim_cmd->add_option("--calibration-trials", sim_trials, "Monte Carlo size of the censoring calibration")
        ->check(CLI::Range(10000, 100000000));
    sim_cmd->add_option("--out", sim_out, "Output prefix: writes <out>_survival.csv and <out>_longitudinal.csv")
        ->required();
    sim_cmd->add_option("--manifest", sim_manifest, "Manifest path (default <out>.manifest.json)");

    // replicate
    auto* rep_cmd = app.add_subcommand("replicate", "Monte Carlo study; prints a CSV table");
    SeedOption rep_seed;
    double rep_s = 0.0;
    int rep_n = 200;
    double rep_censor = 0.2;
    int rep_reps = 100;
    std::string rep_methods = "smkle04,smkle05,smklecv,lvcf";
    int rep_threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    int rep_trials = 100000;
    BasisOptions rep_basis;
    std::string rep_out;
    std::string rep_manifest;
    rep_seed.add(rep_cmd);
    rep_cmd->add_option("--s", rep_s, "Box-Cox parameter")->check(CLI::NonNegativeNumber);
    rep_cmd->add_option("--n", rep_n, "Subjects per replicate")->check(CLI::PositiveNumber);
    rep_cmd->add_option("--censor", rep_censor, "Target censoring proportion");
    rep_cmd->add_option("--reps", rep_reps, "Replicates")->check(CLI::PositiveNumber);
    rep_cmd->add_option("--methods", rep_methods, "Comma list of smkle04, smkle05, smklecv, lvcf");
    rep_cmd->add_option("--threads", rep_threads, "Worker threads")->check(CLI::PositiveNumber);
    rep_cmd->add_option("--calibration-trials", rep_trials, "Monte Carlo size of the censoring calibration")
        ->check(CLI::Range(10000, 100000000));
    rep_basis.add(rep_cmd);
    rep_cmd->add_option("--out", rep_out, "Write the CSV here instead of stdout");
    rep_cmd->add_option("--manifest", rep_manifest, "Manifest path (default <out>.manifest.json, else stderr)");

    // combine-pvalues
    auto* comb_cmd = app.add_subcommand("combine-pvalues", "Cauchy combination of p-values");
    std::vector<std::string> comb_values;
    comb_cmd->add_option("pvalues", comb_values, "p-values in (0, 1)")->required();

    std::vector<const char*> args(argv, argv + argc);
    try {
        app.parse(static_cast<int>(args.size()), const_cast<char**>(args.data()));
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kOk : kInputError;
    }

    try {
        if (*fit_cmd) {
            const Dataset data = fit_data.load();
            FitConfig cfg;
            cfg.basis = fit_basis.config();
            cfg.kernel = parse_kernel(fit_kernel);
            cfg.max_iter = fit_max_iter;
            if (fit_cv) {
                cfg.bandwidth = CvGrid{fit_grid.empty() ? std::vector<double>{} : parse_list(fit_grid), fit_folds,
                                       fit_seed.resolve()};
            } else {
                if (!fit_h) throw InputError("one of --h or --cv is required");
                cfg.bandwidth = *fit_h;
            }
            std::vector<double> s_values = fit_s_grid.empty() ? std::vector<double>{fit_s} : parse_list(fit_s_grid);
            for (double s : s_values) {
                if (!(s >= 0.0)) throw InputError("s must be nonnegative");
            }
            Manifest manifest("fit", fit_cmd);
            manifest.set("seed", fit_seed.resolve());
            bool all_converged = true;
            json doc;
            if (fit_s_grid.empty()) {
                cfg.s = fit_s;
                const auto r = fit(data, cfg);
                all_converged = r.converged;
                doc = fit_json(r, fit_s);
            } else {
                json models = json::array();
                std::optional<std::pair<double, double>> best;
                for (double s : s_values) {
                    cfg.s = s;
                    const auto r = fit(data, cfg);
                    all_converged = all_converged && r.converged;
                    const double b = bic(r, r.n);
                    if (r.converged && (!best || b < best->second)) best = {s, b};
                    models.push_back(fit_json(r, s));
                }
                doc["models"] = models;
                doc["min_bic_s"] = best ? num(best->first) : json(nullptr);
            }
            out << doc.dump(2) << '\n';
            manifest.emit(fit_manifest, err);
            return all_converged ? kOk : kNotConverged;
        }
        if (*cv_cmd) {
            const Dataset data = cv_data.load();
            FitConfig cfg;
            cfg.s = cv_s;
            cfg.basis = cv_basis.config();
            cfg.kernel = parse_kernel(cv_kernel);
            Manifest manifest("cv", cv_cmd);
            const std::uint64_t seed = cv_seed.resolve();
            manifest.set("seed", seed);
            const auto rep = cv_bandwidth(data, cfg, cv_grid.empty() ? std::vector<double>{} : parse_list(cv_grid),
                                          cv_folds, seed);
            json doc;
            json grid = json::array();
            json loss = json::array();
            for (double g : rep.grid) grid.push_back(num(g));
            for (double l : rep.mean_loss) loss.push_back(num(l));
            doc["grid"] = grid;
            doc["mean_loss"] = loss;
            doc["chosen_h"] = num(rep.chosen_h);
            doc["fold_count"] = rep.fold_count;
            doc["convention"] = rep.convention;
            out << doc.dump(2) << '\n';
            manifest.emit(cv_manifest, err);
            return kOk;
        }
        if (*val_cmd) {
            out << validate(val_data.load(), val_h).to_json() << '\n';
            return kOk;
        }
        if (*sim_cmd) {
            Manifest manifest("simulate", sim_cmd);
            SimConfig cfg;
            cfg.s = sim_s;
            cfg.n = sim_n;
            cfg.censor_target = censor_target(sim_censor);
            cfg.seed = sim_seed.resolve();
            cfg.c_lower = calibrate_censoring(cfg, cfg.censor_target, sim_trials, cfg.seed);
            Rng rng = make_stream(cfg.seed, 0);
            const Dataset data = gen_dataset(cfg, rng);
            const std::string surv = sim_out + "_survival.csv";
            const std::string lon = sim_out + "_longitudinal.csv";
            write_dataset(data, surv, lon);
            json doc;
            doc["survival"] = surv;
            doc["longitudinal"] = lon;
            doc["n"] = data.size();
            doc["events"] = data.event_count();
            doc["c_lower"] = num(*cfg.c_lower);
            out << doc.dump(2) << '\n';
            manifest.set("seed", cfg.seed);
            manifest.set("c_lower", num(*cfg.c_lower));
            manifest.emit(sim_manifest.empty() ? sim_out + ".manifest.json" : sim_manifest, err);
            return kOk;
        }
        if (*rep_cmd) {
            Manifest manifest("replicate", rep_cmd);
            SimConfig cfg;
            cfg.s = rep_s;
            cfg.n = rep_n;
            cfg.censor_target = censor_target(rep_censor);
            cfg.seed = rep_seed.resolve();
            StudyOptions opts;
            opts.reps = rep_reps;
            opts.methods.clear();
            for (const auto& m : split(rep_methods, ',')) {
                try {
                    opts.methods.push_back(parse_method(m));
                } catch (const std::invalid_argument& e) {
                    throw InputError(e.what());
                }
            }
            opts.threads = rep_threads;
            opts.calibration_trials = rep_trials;
            if (!rep_basis.interior.empty() || rep_basis.num_knots || rep_basis.natural || rep_basis.order != 3) {
                opts.basis = rep_basis.config();
            }
            const auto report = run_study(cfg, opts);
            const std::string table = study_csv(report);
            if (rep_out.empty()) {
                out << table;
            } else {
                std::ofstream f(rep_out);
                if (!f) throw InputError("cannot write " + rep_out);
                f << table;
            }
            manifest.set("seed", cfg.seed);
            manifest.set("c_lower", num(report.c_lower));
            json counts = json::object();
            for (const auto& r : report.reports) {
                counts[method_name(r.method)] = {{"usable", r.replicates}, {"failures", r.failures}};
            }
            manifest.set("replicates", counts);
            std::string path = rep_manifest;
            if (path.empty() && !rep_out.empty()) path = rep_out + ".manifest.json";
            manifest.emit(path, err);
            return kOk;
        }
        if (*comb_cmd) {
            std::vector<double> p;
            for (const auto& v : comb_values) p.push_back(parse_number(v));
            double c = 0.0;
            try {
                c = cauchy_combine(p);
            } catch (const std::invalid_argument& e) {
                throw InputError(e.what());
            }
            out << fmt6(c) << '\n';
            return kOk;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }
    return kInputError;
}

}  // namespace hazardsieve

#include "hazardsieve/cli.hpp"

#include "helpers.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hazardsieve;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    args.insert(args.begin(), "hazardsieve");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> fit_args()
{
    return {"fit", "--survival", testutil::data_path("example_survival.csv"), "--longitudinal",
            testutil::data_path("example_longitudinal.csv"), "--interior-knots", "1/3,2/3"};
}

std::filesystem::path scratch_dir()
{
    auto dir = std::filesystem::temp_directory_path() / "hazardsieve_cli_test";
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("fit on the bundled example")
{
    auto args = fit_args();
    args.insert(args.end(), {"--s", "0", "--h", "0.2"});
    const auto a = run(args);
    REQUIRE(a.code == 0);
    const auto j = nlohmann::json::parse(a.out);
    CHECK(j.at("beta").size() == 2);
    for (const char* key : {"se", "z", "p", "ci_lo", "ci_hi", "loglik", "bic", "h_used", "converged", "alpha_curve"})
        CHECK(j.contains(key));
    CHECK(j.at("alpha_curve").at("t").size() == 101);
    CHECK(j.at("converged") == true);
    CHECK(j.at("h_used") == 0.2);
    CHECK(a.err.find("manifest") != std::string::npos);

    const auto b = run(args);
    CHECK(a.out == b.out);
}

TEST_CASE("fit over a grid of s")
{
    auto args = fit_args();
    args.insert(args.end(), {"--s-grid", "0,0.5,1", "--h", "0.25"});
    const auto r = run(args);
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j.at("models").size() == 3);
    CHECK(j.contains("min_bic_s"));
}

TEST_CASE("input errors exit with 1")
{
    CHECK(run({"fit", "--longitudinal", testutil::data_path("example_longitudinal.csv"), "--h", "0.2"}).code == 1);
    CHECK(run({"fit", "--survival", "/nonexistent.csv", "--longitudinal", "/nonexistent2.csv", "--h", "0.2"}).code == 1);
    auto noh = fit_args();
    CHECK(run(noh).code == 1);
    CHECK(run({"replicate", "--methods", "cox", "--reps", "1"}).code == 1);
    CHECK(run({"combine-pvalues", "0.5", "1.5"}).code == 1);
    CHECK(run({"nonsense"}).code == 1);
    CHECK(run({}).code == 1);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("non-convergence exits with 2")
{
    auto args = fit_args();
    args.insert(args.end(), {"--h", "0.2", "--s", "0.5", "--max-iter", "1"});
    const auto r = run(args);
    CHECK(r.code == 2);
    CHECK(nlohmann::json::parse(r.out).at("converged") == false);
}

TEST_CASE("combine-pvalues")
{
    const auto r = run({"combine-pvalues", "0.085", "0.021", "0.005", "0.002", "0.052"});
    CHECK(r.code == 0);
    CHECK(std::stod(r.out) == doctest::Approx(0.00642528).epsilon(1e-6));
}

TEST_CASE("validate and cv")
{
    const auto v = run({"validate", "--survival", testutil::data_path("example_survival.csv"), "--longitudinal",
                        testutil::data_path("example_longitudinal.csv"), "--h", "0.1"});
    REQUIRE(v.code == 0);
    const auto j = nlohmann::json::parse(v.out);
    CHECK(j.at("n") == 80);
    CHECK(j.contains("zero_weight_events"));

    const auto c = run({"cv", "--survival", testutil::data_path("example_survival.csv"), "--longitudinal",
                        testutil::data_path("example_longitudinal.csv"), "--interior-knots", "1/3,2/3", "--grid",
                        "0.15,0.3", "--folds", "3", "--seed", "4"});
    REQUIRE(c.code == 0);
    const auto cj = nlohmann::json::parse(c.out);
    CHECK(cj.at("mean_loss").size() == 2);
    CHECK(cj.at("fold_count") == 3);
}

TEST_CASE("simulate and replicate")
{
    const auto dir = scratch_dir();
    const std::string prefix = (dir / "sim").string();
    const auto s = run({"simulate", "--s", "1", "--n", "40", "--seed", "5", "--calibration-trials", "10000", "--out",
                        prefix});
    REQUIRE(s.code == 0);
    CHECK(std::filesystem::exists(prefix + "_survival.csv"));
    CHECK(std::filesystem::exists(prefix + "_longitudinal.csv"));
    CHECK(std::filesystem::exists(prefix + ".manifest.json"));

    const std::vector<std::string> rep{"replicate", "--s",     "0", "--n",       "50",      "--reps",
                                       "2",         "--seed",  "3", "--methods", "smkle04,lvcf", "--calibration-trials",
                                       "10000",     "--threads", "1"};
    const auto a = run(rep);
    REQUIRE(a.code == 0);
    CHECK(a.out.rfind("method,coef,RB,ESE,SE,CP,failures\n", 0) == 0);
    const auto b = run(rep);
    CHECK(a.out == b.out);

    auto with_out = rep;
    const std::string table = (dir / "table.csv").string();
    with_out.insert(with_out.end(), {"--out", table});
    CHECK(run(with_out).code == 0);
    CHECK(std::filesystem::exists(table + ".manifest.json"));
    const auto manifest = nlohmann::json::parse(std::ifstream(table + ".manifest.json"));
    CHECK(manifest.at("command") == "replicate");
    CHECK(manifest.at("seed") == 3);
    CHECK(manifest.contains("c_lower"));
}

TEST_CASE("seed environment override")
{
    const std::vector<std::string> rep{"replicate", "--n", "40", "--reps", "1", "--methods", "smkle04",
                                       "--calibration-trials", "10000", "--seed", "1"};
    setenv("HAZARDSIEVE_SEED", "77", 1);
    const auto env = run(rep);
    unsetenv("HAZARDSIEVE_SEED");
    auto direct_args = rep;
    direct_args.back() = "77";
    const auto direct = run(direct_args);
    CHECK(env.out == direct.out);
    setenv("HAZARDSIEVE_SEED", "abc", 1);
    CHECK(run(rep).code == 1);
    unsetenv("HAZARDSIEVE_SEED");
}

#pragma once

#include "hazardsieve/dataset.hpp"
#include "hazardsieve/simulate.hpp"

#include <random>
#include <string>
#include <vector>

namespace testutil {

// Small random dataset on [0, 1] with measurements at uniform times.
inline hazardsieve::Dataset random_dataset(std::mt19937_64& rng, int n, int p, double event_prob = 0.7)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<int> count(1, 5);
    std::vector<hazardsieve::Subject> subjects;
    for (int i = 0; i < n; ++i) {
        hazardsieve::Subject s;
        s.id = std::to_string(i + 1);
        s.x = 0.1 + 0.9 * u(rng);
        s.delta = u(rng) < event_prob;
        const int m = count(rng);
        for (int j = 0; j < m; ++j) {
            hazardsieve::Measurement mm;
            mm.time = u(rng);
            mm.z = Eigen::VectorXd(p);
            for (int k = 0; k < p; ++k) mm.z[k] = 0.5 * g(rng);
            s.measurements.push_back(mm);
        }
        subjects.push_back(std::move(s));
    }
    return hazardsieve::Dataset(std::move(subjects), p, 1.0);
}

inline hazardsieve::Dataset simulated(double s, int n, std::uint64_t seed, double c_lower = 0.87)
{
    hazardsieve::SimConfig cfg;
    cfg.s = s;
    cfg.n = n;
    cfg.seed = seed;
    cfg.c_lower = c_lower;
    auto rng = hazardsieve::make_stream(seed, 0);
    return hazardsieve::gen_dataset(cfg, rng);
}

inline std::string data_path(const std::string& name)
{
    return std::string(HAZARDSIEVE_TEST_DATA) + "/" + name;
}

}  // namespace testutil

#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace hazardsieve {

/// Raised for malformed or inconsistent input data.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One covariate measurement Z_i(R_ij) taken at time R_ij.
struct Measurement {
    double time = 0.0;
    Eigen::VectorXd z;
};

/// A subject's censored outcome and its intermittently observed covariates.
struct Subject {
    std::string id;
    double x = 0.0;      // min(T, C)
    bool delta = false;  // event indicator
    std::vector<Measurement> measurements;  // nondecreasing in time
};

/// Immutable collection of subjects sharing a covariate dimension and an
/// end-of-study time. The constructor enforces all invariants.
///
/// Measurements later than tau are kept; like any measurement after x they
/// never enter the likelihood.
class Dataset {
public:
    /// tau <= 0 means "use the largest follow-up time".
    Dataset(std::vector<Subject> subjects, int p, double tau = 0.0);

    [[nodiscard]] const std::vector<Subject>& subjects() const noexcept { return subjects_; }
    [[nodiscard]] const Subject& subject(std::size_t i) const { return subjects_.at(i); }
    [[nodiscard]] std::size_t size() const noexcept { return subjects_.size(); }
    [[nodiscard]] int p() const noexcept { return p_; }
    [[nodiscard]] double tau() const noexcept { return tau_; }

    [[nodiscard]] std::size_t event_count() const noexcept;
    [[nodiscard]] std::size_t measurement_count() const noexcept;
    [[nodiscard]] double total_followup() const noexcept;
    [[nodiscard]] double max_x() const noexcept;

    /// Subset in the given order; tau is kept.
    [[nodiscard]] Dataset select(const std::vector<std::size_t>& indices) const;

private:
    std::vector<Subject> subjects_;
    int p_ = 0;
    double tau_ = 0.0;
};

struct ValidationReport {
    std::size_t n = 0;
    std::size_t events = 0;
    double mean_measurements = 0.0;
    std::size_t zero_measurement_subjects = 0;
    bool no_events = false;
    double h = 0.0;
    /// Ids of event subjects with no measurement in (x - h, x], i.e. whose
    /// event term receives zero kernel weight at bandwidth h.
    std::vector<std::string> zero_weight_events;

    [[nodiscard]] std::string to_json() const;
};

Dataset load_dataset(std::istream& survival, std::istream& longitudinal);
Dataset load_dataset(const std::string& survival_path, const std::string& longitudinal_path);

void write_dataset(const Dataset& data, std::ostream& survival, std::ostream& longitudinal);
void write_dataset(const Dataset& data, const std::string& survival_path,
                   const std::string& longitudinal_path);

ValidationReport validate(const Dataset& data, double h);

/// Subjects in `competing_ids` are moved to censored at max_followup, which
/// keeps them in the risk set until the end of follow-up.
Dataset recode_competing(const Dataset& data, double max_followup,
                         const std::set<std::string>& competing_ids);

/// Divides every time by the largest follow-up time; tau becomes 1.
Dataset rescale_time(const Dataset& data);

}  // namespace hazardsieve

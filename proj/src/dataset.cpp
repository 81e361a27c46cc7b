#include "hazardsieve/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <unordered_map>

namespace hazardsieve {

namespace {

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_real(const std::string& field, const char* what, std::size_t line_no)
{
    double v = 0.0;
    const char* begin = field.data();
    const char* end = field.data() + field.size();
    if (!field.empty() && *begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (field.empty() || ec != std::errc{} || ptr != end || !std::isfinite(v)) {
        throw DataError("non-numeric " + std::string(what) + " '" + field + "' on line " +
                        std::to_string(line_no));
    }
    return v;
}

// Reads non-blank lines, skipping the header. Returns (line number, fields).
std::vector<std::pair<std::size_t, std::vector<std::string>>> read_rows(std::istream& in,
                                                                        std::vector<std::string>& header)
{
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (trim(line).empty()) continue;
        if (!have_header) {
            header = split_csv_line(line);
            have_header = true;
            continue;
        }
        rows.emplace_back(line_no, split_csv_line(line));
    }
    return rows;
}

std::string format_real(double v)
{
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace

Dataset::Dataset(std::vector<Subject> subjects, int p, double tau)
    : subjects_(std::move(subjects))
    , p_(p)
{
    if (subjects_.empty()) throw DataError("empty dataset");
    if (p_ < 0) throw DataError("negative covariate dimension");
    double max_x = 0.0;
    for (auto& s : subjects_) {
        if (!std::isfinite(s.x) || s.x < 0.0) throw DataError("subject " + s.id + ": invalid time");
        max_x = std::max(max_x, s.x);
        for (const auto& m : s.measurements) {
            if (!std::isfinite(m.time) || m.time < 0.0)
                throw DataError("subject " + s.id + ": invalid measurement time");
            if (m.z.size() != p_)
                throw DataError("subject " + s.id + ": covariate vector has wrong length");
            if (!m.z.allFinite()) throw DataError("subject " + s.id + ": non-finite covariate");
        }
        std::stable_sort(s.measurements.begin(), s.measurements.end(),
                         [](const Measurement& a, const Measurement& b) { return a.time < b.time; });
    }
    tau_ = tau > 0.0 ? tau : max_x;
    if (!(tau_ > 0.0)) throw DataError("end-of-study time must be positive");
    if (max_x > tau_) throw DataError("follow-up time exceeds end of study");
}

std::size_t Dataset::event_count() const noexcept
{
    return static_cast<std::size_t>(
        std::count_if(subjects_.begin(), subjects_.end(), [](const Subject& s) { return s.delta; }));
}

std::size_t Dataset::measurement_count() const noexcept
{
    std::size_t total = 0;
    for (const auto& s : subjects_) total += s.measurements.size();
    return total;
}

double Dataset::total_followup() const noexcept
{
    double total = 0.0;
    for (const auto& s : subjects_) total += s.x;
    return total;
}

double Dataset::max_x() const noexcept
{
    double m = 0.0;
    for (const auto& s : subjects_) m = std::max(m, s.x);
    return m;
}

Dataset Dataset::select(const std::vector<std::size_t>& indices) const
{
    std::vector<Subject> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(subjects_.at(i));
    return Dataset(std::move(out), p_, tau_);
}

Dataset load_dataset(std::istream& survival, std::istream& longitudinal)
{
    std::vector<std::string> surv_header;
    const auto surv_rows = read_rows(survival, surv_header);
    if (surv_header.size() < 3 || surv_header[0] != "id" || surv_header[1] != "time" ||
        surv_header[2] != "status") {
        throw DataError("survival file must have header id,time,status");
    }
    if (surv_rows.empty()) throw DataError("empty dataset");

    std::vector<Subject> subjects;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& [line_no, f] : surv_rows) {
        if (f.size() != 3) throw DataError("survival line " + std::to_string(line_no) + ": expected 3 fields");
        Subject s;
        s.id = f[0];
        if (s.id.empty()) throw DataError("survival line " + std::to_string(line_no) + ": empty id");
        s.x = parse_real(f[1], "time", line_no);
        const double status = parse_real(f[2], "status", line_no);
        if (status != 0.0 && status != 1.0)
            throw DataError("status must be 0 or 1 on survival line " + std::to_string(line_no));
        s.delta = status == 1.0;
        if (!index.emplace(s.id, subjects.size()).second) throw DataError("duplicate id " + s.id);
        subjects.push_back(std::move(s));
    }

    std::vector<std::string> long_header;
    const auto long_rows = read_rows(longitudinal, long_header);
    if (long_header.size() < 2 || long_header[0] != "id" || long_header[1] != "obs_time")
        throw DataError("longitudinal file must have header id,obs_time,z1..zp");
    const int p = static_cast<int>(long_header.size()) - 2;
    for (const auto& [line_no, f] : long_rows) {
        if (f.size() != long_header.size()) {
            throw DataError("longitudinal line " + std::to_string(line_no) + ": expected " +
                            std::to_string(long_header.size()) + " fields (missing covariate?)");
        }
        auto it = index.find(f[0]);
        if (it == index.end()) throw DataError("orphan measurement for id " + f[0]);
        Measurement m;
        m.time = parse_real(f[1], "obs_time", line_no);
        m.z.resize(p);
        for (int k = 0; k < p; ++k) m.z[k] = parse_real(f[2 + k], "covariate", line_no);
        subjects[it->second].measurements.push_back(std::move(m));
    }
    return Dataset(std::move(subjects), p);
}

Dataset load_dataset(const std::string& survival_path, const std::string& longitudinal_path)
{
    std::ifstream surv(survival_path);
    if (!surv) throw DataError("cannot open " + survival_path);
    std::ifstream lng(longitudinal_path);
    if (!lng) throw DataError("cannot open " + longitudinal_path);
    return load_dataset(surv, lng);
}

void write_dataset(const Dataset& data, std::ostream& survival, std::ostream& longitudinal)
{
    survival << "id,time,status\n";
    longitudinal << "id,obs_time";
    for (int k = 1; k <= data.p(); ++k) longitudinal << ",z" << k;
    longitudinal << '\n';
    for (const auto& s : data.subjects()) {
        survival << s.id << ',' << format_real(s.x) << ',' << (s.delta ? 1 : 0) << '\n';
        for (const auto& m : s.measurements) {
            longitudinal << s.id << ',' << format_real(m.time);
            for (int k = 0; k < data.p(); ++k) longitudinal << ',' << format_real(m.z[k]);
            longitudinal << '\n';
        }
    }
}

void write_dataset(const Dataset& data, const std::string& survival_path,
                   const std::string& longitudinal_path)
{
    std::ofstream surv(survival_path);
    std::ofstream lng(longitudinal_path);
    if (!surv || !lng) throw DataError("cannot write dataset files");
    write_dataset(data, surv, lng);
}

ValidationReport validate(const Dataset& data, double h)
{
    ValidationReport r;
    r.n = data.size();
    r.events = data.event_count();
    r.no_events = r.events == 0;
    r.mean_measurements = static_cast<double>(data.measurement_count()) / static_cast<double>(r.n);
    r.h = h;
    for (const auto& s : data.subjects()) {
        if (s.measurements.empty()) ++r.zero_measurement_subjects;
        if (!s.delta) continue;
        const bool weighted = std::any_of(s.measurements.begin(), s.measurements.end(), [&](const Measurement& m) {
            return m.time <= s.x && s.x - m.time < h;
        });
        if (!weighted) r.zero_weight_events.push_back(s.id);
    }
    return r;
}

std::string ValidationReport::to_json() const
{
    nlohmann::ordered_json j;
    j["n"] = n;
    j["events"] = events;
    j["mean_measurements"] = mean_measurements;
    j["zero_weight_events"] = zero_weight_events;
    j["h"] = h;
    j["zero_measurement_subjects"] = zero_measurement_subjects;
    j["flags"] = nlohmann::json::array();
    if (no_events) j["flags"].push_back("no events");
    return j.dump(2);
}

Dataset recode_competing(const Dataset& data, double max_followup,
                         const std::set<std::string>& competing_ids)
{
    if (max_followup < data.max_x()) throw DataError("max_followup is smaller than an observed time");
    std::vector<Subject> out = data.subjects();
    for (auto& s : out) {
        if (competing_ids.count(s.id) == 0) continue;
        s.x = max_followup;
        s.delta = false;
    }
    return Dataset(std::move(out), data.p(), std::max(data.tau(), max_followup));
}

Dataset rescale_time(const Dataset& data)
{
    const double scale = data.max_x();
    if (!(scale > 0.0)) throw DataError("cannot rescale: all follow-up times are zero");
    std::vector<Subject> out = data.subjects();
    for (auto& s : out) {
        s.x /= scale;
        for (auto& m : s.measurements) m.time /= scale;
    }
    return Dataset(std::move(out), data.p(), 1.0);
}

}  // namespace hazardsieve

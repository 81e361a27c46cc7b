#include "hazardsieve/spline.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hazardsieve {

SplineBasis::SplineBasis(int order, std::vector<double> interior_knots, std::pair<double, double> boundary,
                         bool natural)
    : order_(order)
    , natural_(natural)
    , lower_(boundary.first)
    , upper_(boundary.second)
    , interior_(std::move(interior_knots))
{
    if (order_ < 2) throw std::invalid_argument("spline order must be at least 2");
    if (!(lower_ < upper_)) throw std::invalid_argument("spline boundary must satisfy lower < upper");
    if (natural_ && order_ < 4) throw std::invalid_argument("natural splines require order >= 4");
    for (std::size_t k = 0; k < interior_.size(); ++k) {
        if (!(interior_[k] > lower_ && interior_[k] < upper_))
            throw std::invalid_argument("interior knot outside the boundary");
        if (k > 0 && !(interior_[k] > interior_[k - 1]))
            throw std::invalid_argument("interior knots must be strictly increasing");
    }

    knots_.assign(order_, lower_);
    knots_.insert(knots_.end(), interior_.begin(), interior_.end());
    knots_.insert(knots_.end(), order_, upper_);
    raw_dim_ = static_cast<int>(interior_.size()) + order_;

    if (!natural_) {
        map_ = Eigen::MatrixXd::Identity(raw_dim_, raw_dim_);
        return;
    }
    // Null space of the two boundary second-derivative functionals.
    Eigen::MatrixXd c(raw_dim_, 2);
    c.col(0) = eval_raw_derivative(lower_, 2);
    c.col(1) = eval_raw_derivative(upper_, 2);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(c);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(raw_dim_, raw_dim_);
    map_ = q.rightCols(raw_dim_ - 2);
}

// N[k][i] holds the order-(k+1) B-spline i at t.
std::vector<std::vector<double>> SplineBasis::table(double t) const
{
    const int nk = static_cast<int>(knots_.size());
    std::vector<std::vector<double>> n(order_);
    n[0].assign(nk - 1, 0.0);
    // Half-open spans; the right boundary falls into the last nonempty span.
    int span = -1;
    if (t >= upper_) {
        span = order_ + static_cast<int>(interior_.size()) - 1;
    } else {
        const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
        span = static_cast<int>(it - knots_.begin()) - 1;
    }
    n[0][span] = 1.0;
    for (int k = 2; k <= order_; ++k) {
        auto& cur = n[k - 1];
        const auto& prev = n[k - 2];
        cur.assign(nk - k, 0.0);
        for (int i = 0; i < nk - k; ++i) {
            double v = 0.0;
            const double left = knots_[i + k - 1] - knots_[i];
            const double right = knots_[i + k] - knots_[i + 1];
            if (left > 0.0 && prev[i] != 0.0) v += (t - knots_[i]) / left * prev[i];
            if (right > 0.0 && prev[i + 1] != 0.0) v += (knots_[i + k] - t) / right * prev[i + 1];
            cur[i] = v;
        }
    }
    return n;
}

Eigen::VectorXd SplineBasis::eval_raw(double t) const
{
    if (!(t >= lower_ && t <= upper_)) throw std::out_of_range("spline evaluated outside its boundary");
    const auto n = table(t);
    return Eigen::Map<const Eigen::VectorXd>(n.back().data(), raw_dim_);
}

Eigen::VectorXd SplineBasis::eval_raw_derivative(double t, int deriv) const
{
    if (!(t >= lower_ && t <= upper_)) throw std::out_of_range("spline evaluated outside its boundary");
    if (deriv < 0) throw std::invalid_argument("negative derivative order");
    if (deriv >= order_) return Eigen::VectorXd::Zero(raw_dim_);
    const auto n = table(t);
    const int nk = static_cast<int>(knots_.size());
    // Start from order (order_ - deriv) values and apply the derivative
    // recurrence deriv times.
    std::vector<double> cur = n[order_ - deriv - 1];
    for (int k = order_ - deriv + 1; k <= order_; ++k) {
        std::vector<double> next(nk - k, 0.0);
        for (int i = 0; i < nk - k; ++i) {
            double v = 0.0;
            const double left = knots_[i + k - 1] - knots_[i];
            const double right = knots_[i + k] - knots_[i + 1];
            if (left > 0.0) v += cur[i] / left;
            if (right > 0.0) v -= cur[i + 1] / right;
            next[i] = (k - 1) * v;
        }
        cur = std::move(next);
    }
    return Eigen::Map<const Eigen::VectorXd>(cur.data(), raw_dim_);
}

Eigen::VectorXd SplineBasis::eval(double t) const
{
    if (!natural_) return eval_raw(t);
    return map_.transpose() * eval_raw(t);
}

Eigen::VectorXd SplineBasis::constant_coefficients() const
{
    // Raw coefficients of the constant 1 are all ones; map_ has orthonormal
    // columns whose span contains that vector.
    if (!natural_) return Eigen::VectorXd::Ones(raw_dim_);
    return map_.transpose() * Eigen::VectorXd::Ones(raw_dim_);
}

double SplineBasis::curve(const Eigen::VectorXd& gamma, double t) const
{
    return gamma.dot(eval(t));
}

std::vector<double> SplineBasis::breakpoints_in(double a, double b) const
{
    if (a > b) throw std::invalid_argument("breakpoints_in requires a <= b");
    std::vector<double> out;
    for (double k : interior_) {
        if (k > a && k < b) out.push_back(k);
    }
    return out;
}

int default_knot_count(std::size_t n, int kappa)
{
    const double nu = 3.0 / (3.0 + 10.0 * kappa);
    const int k = static_cast<int>(std::ceil(std::pow(static_cast<double>(n), nu) - 1e-12));
    return std::max(2, k);
}

std::vector<double> quantile_knots(std::vector<double> times, int k, double lower, double upper)
{
    if (k < 0) throw std::invalid_argument("knot count must be nonnegative");
    if (times.empty() || k == 0) return {};
    std::sort(times.begin(), times.end());
    std::vector<double> knots;
    const double m = static_cast<double>(times.size() - 1);
    for (int j = 1; j <= k; ++j) {
        const double pos = m * j / (k + 1.0);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, times.size() - 1);
        const double v = times[lo] + (pos - lo) * (times[hi] - times[lo]);
        if (v > lower && v < upper && (knots.empty() || v > knots.back())) knots.push_back(v);
    }
    return knots;
}

}  // namespace hazardsieve

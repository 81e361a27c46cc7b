#include "hazardsieve/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hazardsieve {

Eigen::VectorXd SieveParams::pack() const
{
    Eigen::VectorXd theta(beta.size() + gamma.size());
    theta << beta, gamma;
    return theta;
}

SieveParams SieveParams::unpack(const Eigen::VectorXd& theta, int p)
{
    if (p < 0 || p > theta.size()) throw std::invalid_argument("bad parameter split");
    return {theta.head(p), theta.tail(theta.size() - p)};
}

namespace {

// Neumaier compensated sum; the objective is compared across line-search
// trials at differences near round-off.
class CompensatedSum {
public:
    void add(double v) noexcept
    {
        const double t = sum_ + v;
        comp_ += std::abs(sum_) >= std::abs(v) ? (sum_ - t) + v : (v - t) + sum_;
        sum_ = t;
    }
    [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// Column-wise growable store for design rows.
struct RowSink {
    int dim;
    std::vector<double> x;
    std::vector<double> w;
    std::vector<int> subject;
    std::vector<double> time;

    void push(const Eigen::VectorXd& z, const Eigen::VectorXd& b, double weight, int i, double t)
    {
        x.insert(x.end(), z.data(), z.data() + z.size());
        x.insert(x.end(), b.data(), b.data() + b.size());
        w.push_back(weight);
        subject.push_back(i);
        time.push_back(t);
    }

    void move_into(Eigen::MatrixXd& mx, Eigen::VectorXd& mw, std::vector<int>& ms, std::vector<double>& mt)
    {
        const auto cols = static_cast<Eigen::Index>(w.size());
        mx = Eigen::Map<Eigen::MatrixXd>(x.data(), dim, cols);
        mw = Eigen::Map<Eigen::VectorXd>(w.data(), cols);
        ms = std::move(subject);
        mt = std::move(time);
    }
};

void check_basis(const Dataset& data, const SplineBasis& basis)
{
    if (basis.lower() > 0.0 || basis.upper() < data.tau() * (1.0 - 1e-12)) {
        throw std::invalid_argument("spline boundary must cover [0, tau]");
    }
}

// Quadrature nodes of [a, b] split at spline knots.
template <class Visit>
void for_each_split_node(const SplineBasis& basis, const QuadratureRule& quad, double a, double b, Visit&& visit)
{
    if (!(b > a)) return;
    auto cuts = basis.breakpoints_in(a, b);
    double left = a;
    cuts.push_back(b);
    for (double right : cuts) {
        quad.for_each_node(left, right, visit);
        left = right;
    }
}

double clamp_to_basis(const SplineBasis& basis, double t)
{
    return std::clamp(t, basis.lower(), basis.upper());
}

}  // namespace

LikelihoodDesign build_kernel_design(const Dataset& data, double h, const SplineBasis& basis,
                                     const QuadratureRule& quad, const KernelSpec& kernel)
{
    if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");
    check_basis(data, basis);
    LikelihoodDesign d;
    d.p = data.p();
    d.q = basis.dim();
    d.n = data.size();
    RowSink events{d.dim(), {}, {}, {}, {}};
    RowSink cum{d.dim(), {}, {}, {}, {}};

    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& s = data.subject(i);
        const int si = static_cast<int>(i);
        if (s.delta) ++d.raw_events;
        Eigen::VectorXd bx;
        for (const auto& m : s.measurements) {
            if (m.time > s.x) break;
            if (s.delta) {
                const double w = kh_eval(kernel, s.x - m.time, h);
                if (w > 0.0) {
                    if (bx.size() == 0) bx = basis.eval(clamp_to_basis(basis, s.x));
                    events.push(m.z, bx, w, si, s.x);
                }
            }
            const double upper = std::min(s.x, m.time + h);
            for_each_split_node(basis, quad, m.time, upper, [&](double t, double gw) {
                const double w = gw * kh_eval(kernel, t - m.time, h);
                if (w > 0.0) cum.push(m.z, basis.eval(clamp_to_basis(basis, t)), w, si, t);
            });
        }
    }
    events.move_into(d.event_x, d.event_w, d.event_subject, d.event_time);
    cum.move_into(d.cum_x, d.cum_w, d.cum_subject, d.cum_time);
    return d;
}

LikelihoodDesign build_lvcf_design(const Dataset& data, const SplineBasis& basis, const QuadratureRule& quad)
{
    check_basis(data, basis);
    LikelihoodDesign d;
    d.p = data.p();
    d.q = basis.dim();
    d.n = data.size();
    RowSink events{d.dim(), {}, {}, {}, {}};
    RowSink cum{d.dim(), {}, {}, {}, {}};

    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& s = data.subject(i);
        const int si = static_cast<int>(i);
        if (s.measurements.empty()) throw DataError("LVCF needs at least one measurement for subject " + s.id);
        if (s.delta) ++d.raw_events;

        // Step path on [0, x]: breakpoints at measurement times after the first.
        std::vector<std::pair<double, const Eigen::VectorXd*>> steps;
        steps.emplace_back(0.0, &s.measurements.front().z);
        for (std::size_t j = 1; j < s.measurements.size(); ++j) {
            const auto& m = s.measurements[j];
            if (m.time > s.x) break;
            if (m.time == steps.back().first) {
                steps.back().second = &m.z;
            } else {
                steps.emplace_back(m.time, &m.z);
            }
        }
        if (s.delta) events.push(*steps.back().second, basis.eval(clamp_to_basis(basis, s.x)), 1.0, si, s.x);
        for (std::size_t k = 0; k < steps.size(); ++k) {
            const double a = steps[k].first;
            const double b = k + 1 < steps.size() ? steps[k + 1].first : s.x;
            const auto& z = *steps[k].second;
            for_each_split_node(basis, quad, a, b, [&](double t, double gw) {
                cum.push(z, basis.eval(clamp_to_basis(basis, t)), gw, si, t);
            });
        }
    }
    events.move_into(d.event_x, d.event_w, d.event_subject, d.event_time);
    cum.move_into(d.cum_x, d.cum_w, d.cum_subject, d.cum_time);
    return d;
}

SieveObjective::SieveObjective(LikelihoodDesign design, BoxCoxTransform transform)
    : design_(std::move(design))
    , transform_(transform)
{
}

double SieveObjective::value(const Eigen::VectorXd& theta) const
{
    if (theta.size() != dim()) throw std::invalid_argument("parameter dimension mismatch");
    const Eigen::VectorXd eta_e = design_.event_x.transpose() * theta;
    const Eigen::VectorXd eta_c = design_.cum_x.transpose() * theta;
    CompensatedSum total;
    for (Eigen::Index e = 0; e < eta_e.size(); ++e) total.add(design_.event_w[e] * transform_.log_h(eta_e[e]));
    for (Eigen::Index c = 0; c < eta_c.size(); ++c) total.add(-design_.cum_w[c] * transform_.h_eval(eta_c[c]));
    return total.value() / static_cast<double>(design_.n);
}

double SieveObjective::value_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const
{
    if (theta.size() != dim()) throw std::invalid_argument("parameter dimension mismatch");
    const Eigen::VectorXd eta_e = design_.event_x.transpose() * theta;
    const Eigen::VectorXd eta_c = design_.cum_x.transpose() * theta;
    Eigen::VectorXd ge(eta_e.size());
    Eigen::VectorXd gc(eta_c.size());
    CompensatedSum total;
    for (Eigen::Index e = 0; e < eta_e.size(); ++e) {
        const auto t = transform_.terms(eta_e[e]);
        total.add(design_.event_w[e] * t.log_h);
        ge[e] = design_.event_w[e] * t.ratio1;
    }
    for (Eigen::Index c = 0; c < eta_c.size(); ++c) {
        const auto t = transform_.terms(eta_c[c]);
        total.add(-design_.cum_w[c] * t.h);
        gc[c] = design_.cum_w[c] * t.dh;
    }
    const double inv_n = 1.0 / static_cast<double>(design_.n);
    grad = (design_.event_x * ge - design_.cum_x * gc) * inv_n;
    return total.value() * inv_n;
}

Eigen::VectorXd SieveObjective::subject_values(const Eigen::VectorXd& theta) const
{
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(design_.n));
    const Eigen::VectorXd eta_e = design_.event_x.transpose() * theta;
    const Eigen::VectorXd eta_c = design_.cum_x.transpose() * theta;
    for (Eigen::Index e = 0; e < eta_e.size(); ++e)
        out[design_.event_subject[e]] += design_.event_w[e] * transform_.log_h(eta_e[e]);
    for (Eigen::Index c = 0; c < eta_c.size(); ++c)
        out[design_.cum_subject[c]] -= design_.cum_w[c] * transform_.h_eval(eta_c[c]);
    return out;
}

Eigen::MatrixXd SieveObjective::subject_scores(const Eigen::VectorXd& theta) const
{
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim(), static_cast<Eigen::Index>(design_.n));
    const Eigen::VectorXd eta_e = design_.event_x.transpose() * theta;
    const Eigen::VectorXd eta_c = design_.cum_x.transpose() * theta;
    for (Eigen::Index e = 0; e < eta_e.size(); ++e) {
        out.col(design_.event_subject[e]) +=
            design_.event_w[e] * transform_.terms(eta_e[e]).ratio1 * design_.event_x.col(e);
    }
    for (Eigen::Index c = 0; c < eta_c.size(); ++c) {
        out.col(design_.cum_subject[c]) -=
            design_.cum_w[c] * transform_.h_prime(eta_c[c]) * design_.cum_x.col(c);
    }
    return out;
}

bool SieveObjective::touches_tail(const Eigen::VectorXd& theta) const
{
    const double y0 = transform_.switch_point();
    const Eigen::VectorXd eta_e = design_.event_x.transpose() * theta;
    const Eigen::VectorXd eta_c = design_.cum_x.transpose() * theta;
    return (eta_e.size() > 0 && eta_e.minCoeff() < y0) || (eta_c.size() > 0 && eta_c.minCoeff() < y0);
}

namespace {

Eigen::VectorXd checked_pack(const SieveParams& params, const Dataset& data, const SplineBasis& basis)
{
    if (params.beta.size() != data.p() || params.gamma.size() != basis.dim())
        throw std::invalid_argument("parameter dimensions do not match data and basis");
    if (!params.beta.allFinite() || !params.gamma.allFinite())
        throw std::invalid_argument("parameters must be finite");
    return params.pack();
}

}  // namespace

double loglik(const SieveParams& params, const Dataset& data, double h, const SplineBasis& basis,
              const BoxCoxTransform& tr, const QuadratureRule& quad)
{
    const auto theta = checked_pack(params, data, basis);
    const SieveObjective obj(build_kernel_design(data, h, basis, quad), tr);
    return obj.value(theta);
}

Eigen::VectorXd loglik_grad(const SieveParams& params, const Dataset& data, double h, const SplineBasis& basis,
                            const BoxCoxTransform& tr, const QuadratureRule& quad)
{
    const auto theta = checked_pack(params, data, basis);
    const SieveObjective obj(build_kernel_design(data, h, basis, quad), tr);
    Eigen::VectorXd grad;
    obj.value_and_gradient(theta, grad);
    return grad;
}

double loglik_oracle(const SieveParams& params, const Dataset& data, double h, const SplineBasis& basis,
                     const BoxCoxTransform& tr)
{
    if (data.size() > 50) throw std::invalid_argument("loglik_oracle is limited to n <= 50");
    if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");
    checked_pack(params, data, basis);
    const KernelSpec kernel;
    double total = 0.0;
    for (const auto& s : data.subjects()) {
        for (const auto& m : s.measurements) {
            if (m.time > s.x) continue;
            const double lin = params.beta.dot(m.z);
            if (s.delta) {
                const double w = kh_eval(kernel, s.x - m.time, h);
                if (w > 0.0) total += w * tr.log_h(basis.curve(params.gamma, s.x) + lin);
            }
            const double upper = std::min(s.x, m.time + h);
            if (upper > m.time) {
                total -= adaptive_simpson(
                    [&](double t) {
                        return kh_eval(kernel, t - m.time, h) * tr.h_eval(basis.curve(params.gamma, t) + lin);
                    },
                    m.time, upper, 1e-11);
            }
        }
    }
    return total / static_cast<double>(data.size());
}

}  // namespace hazardsieve

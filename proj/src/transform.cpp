#include "hazardsieve/transform.hpp"

#include <cmath>
#include <stdexcept>

namespace hazardsieve {

BoxCoxTransform::BoxCoxTransform(double s, double floor_eps)
    : s_(s)
    , floor_eps_(floor_eps)
{
    if (!(s_ >= 0.0) || !std::isfinite(s_)) throw std::invalid_argument("Box-Cox index s must be >= 0");
    if (!(floor_eps_ > 0.0 && floor_eps_ < 1.0)) throw std::invalid_argument("floor_eps must lie in (0, 1)");
    if (s_ == 0.0) {
        y0_ = std::log(floor_eps_);
        tail_rate_ = 1.0;
    } else {
        // (1 + s y0)^(1/s) = floor_eps
        y0_ = std::expm1(s_ * std::log(floor_eps_)) / s_;
        tail_rate_ = std::pow(floor_eps_, -s_);
    }
}

HazardTerms BoxCoxTransform::terms(double y) const noexcept
{
    HazardTerms t;
    if (y < y0_) {
        const double u = 1.0 + tail_rate_ * (y0_ - y);
        t.on_tail = true;
        t.h = floor_eps_ / u;
        t.log_h = std::log(floor_eps_) - std::log(u);
        t.ratio1 = tail_rate_ / u;
        t.dh = t.h * t.ratio1;
        t.ratio2 = t.dh * t.ratio1;
        return t;
    }
    if (s_ == 0.0) {
        t.h = std::exp(y);
        t.log_h = y;
        t.dh = t.h;
        t.ratio1 = 1.0;
        t.ratio2 = t.h;
        return t;
    }
    const double sy = s_ * y;
    const double log_base = std::log1p(sy);
    t.log_h = log_base / s_;
    t.h = std::exp(t.log_h);
    t.ratio1 = 1.0 / (1.0 + sy);
    t.dh = t.h * t.ratio1;
    t.ratio2 = t.dh * t.ratio1;
    return t;
}

double BoxCoxTransform::h_eval(double y) const noexcept { return terms(y).h; }
double BoxCoxTransform::h_prime(double y) const noexcept { return terms(y).dh; }
double BoxCoxTransform::log_h(double y) const noexcept { return terms(y).log_h; }

double BoxCoxTransform::g_eval(double hazard) const
{
    if (!(hazard > 0.0)) throw std::domain_error("Box-Cox transform needs a positive hazard");
    if (s_ == 0.0) return std::log(hazard);
    return std::expm1(s_ * std::log(hazard)) / s_;
}

}  // namespace hazardsieve

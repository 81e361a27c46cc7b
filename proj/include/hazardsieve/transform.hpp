#pragma once

namespace hazardsieve {

/// Derivative combinations used by the likelihood and the variance estimator.
struct HazardTerms {
    double h = 0.0;       // H(y)
    double log_h = 0.0;   // log H(y)
    double dh = 0.0;      // H'(y)
    double ratio1 = 0.0;  // H'/H
    double ratio2 = 0.0;  // H'^2/H
    bool on_tail = false; // evaluated below the switch point
};

/// Inverse Box-Cox transform H(y) = (1 + s y)^(1/s), H(y) = exp(y) at s = 0.
///
/// Below the point where H reaches floor_eps the function continues as
/// floor_eps / (1 + b (y0 - y)) with value and slope matched at y0, so H is
/// positive, increasing and C^1 on the whole real line. The same switch is
/// applied at s = 0 (y0 = log floor_eps), which is the s -> 0 limit.
class BoxCoxTransform {
public:
    explicit BoxCoxTransform(double s = 0.0, double floor_eps = 1e-8);

    [[nodiscard]] double s() const noexcept { return s_; }
    [[nodiscard]] double floor_eps() const noexcept { return floor_eps_; }
    [[nodiscard]] double switch_point() const noexcept { return y0_; }

    [[nodiscard]] double h_eval(double y) const noexcept;
    [[nodiscard]] double h_prime(double y) const noexcept;
    [[nodiscard]] double log_h(double y) const noexcept;
    [[nodiscard]] HazardTerms terms(double y) const noexcept;

    /// The Box-Cox transform G = H^{-1} on (0, inf), without the tail.
    [[nodiscard]] double g_eval(double hazard) const;

private:
    double s_;
    double floor_eps_;
    double y0_;
    double tail_rate_;  // H'(y0) / floor_eps
};

struct HazardRatios {
    double h1;
    double h2;
};

inline double h_eval(const BoxCoxTransform& tr, double y) noexcept { return tr.h_eval(y); }
inline double h_prime(const BoxCoxTransform& tr, double y) noexcept { return tr.h_prime(y); }
inline HazardRatios h_ratios(const BoxCoxTransform& tr, double y) noexcept
{
    const auto t = tr.terms(y);
    return {t.ratio1, t.ratio2};
}

}  // namespace hazardsieve

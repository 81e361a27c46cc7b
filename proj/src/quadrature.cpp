#include "hazardsieve/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hazardsieve {

QuadratureRule::QuadratureRule(int nodes_per_piece)
{
    if (nodes_per_piece < 2) throw std::invalid_argument("quadrature needs at least 2 nodes per piece");
    const int n = nodes_per_piece;
    nodes_.resize(n);
    weights_.resize(n);
    // Newton iteration on P_n from the Chebyshev-like initial guess; roots are
    // symmetric so only half are computed.
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // Recompute the derivative at the converged root.
        double p0 = 1.0;
        double p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes_[i] = -x;
        nodes_[n - 1 - i] = x;
        weights_[i] = w;
        weights_[n - 1 - i] = w;
    }
    if (n % 2 == 1) nodes_[n / 2] = 0.0;
}

double QuadratureRule::integrate(const std::function<double(double)>& f, double a, double b) const
{
    double total = 0.0;
    for_each_node(a, b, [&](double t, double w) { total += w * f(t); });
    return total;
}

namespace {

double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                    double whole, double tol, int depth, int forced)
{
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double diff = left + right - whole;
    if (depth <= 0 || (forced <= 0 && std::abs(diff) <= 15.0 * tol)) return left + right + diff / 15.0;
    return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, forced - 1) +
           simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, forced - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double abs_tol, int max_depth)
{
    if (a == b) return 0.0;
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // A few forced subdivisions guard against accidental agreement on coarse grids.
    return simpson_step(f, a, b, fa, fm, fb, whole, abs_tol, max_depth, 4);
}

}  // namespace hazardsieve

#pragma once

#include <functional>
#include <vector>

namespace hazardsieve {

/// Gauss-Legendre rule applied on each piece of a subdivided interval.
class QuadratureRule {
public:
    explicit QuadratureRule(int nodes_per_piece = 16);

    [[nodiscard]] int nodes_per_piece() const noexcept { return static_cast<int>(nodes_.size()); }
    /// Nodes and weights on [-1, 1].
    [[nodiscard]] const std::vector<double>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] const std::vector<double>& weights() const noexcept { return weights_; }

    /// Calls visit(t, w) for every node of the rule mapped onto [a, b].
    template <class Visit>
    void for_each_node(double a, double b, Visit&& visit) const
    {
        const double half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        for (std::size_t k = 0; k < nodes_.size(); ++k) visit(mid + half * nodes_[k], half * weights_[k]);
    }

    [[nodiscard]] double integrate(const std::function<double(double)>& f, double a, double b) const;

private:
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

/// Adaptive Simpson integration to an absolute tolerance.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double abs_tol,
                        int max_depth = 50);

}  // namespace hazardsieve

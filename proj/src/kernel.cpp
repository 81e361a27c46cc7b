#include "hazardsieve/kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace hazardsieve {

KernelSpec parse_kernel(const std::string& name)
{
    if (name == "epanechnikov") return KernelSpec{KernelFamily::Epanechnikov};
    throw std::invalid_argument("unknown kernel '" + name + "'");
}

double k_eval(const KernelSpec& spec, double u) noexcept
{
    switch (spec.family) {
    case KernelFamily::Epanechnikov:
        return std::abs(u) < 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
    }
    return 0.0;
}

double kh_eval(const KernelSpec& spec, double d, double h)
{
    if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");
    if (std::abs(d) >= h) return 0.0;
    return 2.0 * k_eval(spec, d / h) / h;
}

double k_sq_halfline(const KernelSpec& spec) noexcept
{
    switch (spec.family) {
    case KernelFamily::Epanechnikov:
        // 0.5625 * (1 - 2/3 + 1/5)
        return 0.5625 * 8.0 / 15.0;
    }
    return 0.0;
}

}  // namespace hazardsieve

#pragma once

#include <string>

namespace hazardsieve {

enum class KernelFamily { Epanechnikov };

/// Symmetric, unimodal kernel with support (-1, 1).
struct KernelSpec {
    KernelFamily family = KernelFamily::Epanechnikov;
};

KernelSpec parse_kernel(const std::string& name);

/// K(u).
double k_eval(const KernelSpec& spec, double u) noexcept;

/// One-sided scaled weight K_h(d) = 2 K(d / h) / h. Exactly zero for |d| >= h.
double kh_eval(const KernelSpec& spec, double d, double h);

/// Integral of K^2 over [0, 1].
double k_sq_halfline(const KernelSpec& spec) noexcept;

}  // namespace hazardsieve

#pragma once

#include <iosfwd>

namespace hazardsieve {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes: 0 success, 1 input or usage error, 2 fit did not converge.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hazardsieve

#pragma once

#include <span>
#include <vector>

namespace chorus {

/// Quantile by linear interpolation between order statistics, position
/// (n - 1) * q. `sorted` must be ascending and nonempty.
double quantile_sorted(std::span<const double> sorted, double q);

/// Copies, sorts and evaluates each requested quantile.
std::vector<double> quantiles(std::span<const double> values, std::span<const double> qs);

}  // namespace chorus

#include "chorus/stats.hpp"

#include <algorithm>
#include <cmath>

#include "chorus/error.hpp"

namespace chorus {

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(ErrorKind::EmptyInput, "quantile of empty sequence");
  const double pos = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<double> quantiles(std::span<const double> values, std::span<const double> qs) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  out.reserve(qs.size());
  for (double q : qs) out.push_back(quantile_sorted(sorted, q));
  return out;
}

}  // namespace chorus

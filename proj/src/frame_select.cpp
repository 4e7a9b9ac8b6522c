#include "chorus/frame_select.hpp"

#include <algorithm>
#include <numeric>

#include "chorus/error.hpp"

namespace chorus {

namespace {
constexpr double kPeakFraction = 0.25;
}

std::size_t SelectionMask::count() const {
  return static_cast<std::size_t>(std::count(selected.begin(), selected.end(), true));
}

SelectionMask select_frames(std::span<const double> frame_power) {
  const std::size_t n = frame_power.size();
  if (n == 0) throw Error(ErrorKind::EmptyInput, "no frames to select from");

  const std::size_t top = std::max<std::size_t>(1, (n + 99) / 100);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (frame_power[a] != frame_power[b]) return frame_power[a] > frame_power[b];
                      return a < b;
                    });

  double sum = 0.0;
  for (std::size_t i = 0; i < top; ++i) sum += frame_power[order[i]];

  SelectionMask mask;
  mask.peak_estimate = sum / static_cast<double>(top);
  mask.threshold = kPeakFraction * mask.peak_estimate;
  mask.selected.resize(n);
  for (std::size_t i = 0; i < n; ++i) mask.selected[i] = frame_power[i] >= mask.threshold;
  return mask;
}

}  // namespace chorus

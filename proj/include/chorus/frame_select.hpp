#pragma once

#include <span>
#include <vector>

#include "chorus/dsp.hpp"

namespace chorus {

struct SelectionMask {
  std::vector<bool> selected;
  double threshold = 0.0;
  double peak_estimate = 0.0;

  std::size_t count() const;
};

/// Relative power threshold used on training recordings: the mean power of
/// the loudest 1% of frames (at least one) estimates the peak level, and
/// every frame reaching a quarter of it is kept.
SelectionMask select_frames(std::span<const double> frame_power);
inline SelectionMask select_frames(const Spectrogram& spec) { return select_frames(spec.frame_power); }

}  // namespace chorus

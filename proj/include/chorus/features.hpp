#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chorus/dsp.hpp"

namespace chorus {

struct FrameFeatures {
  double f_mean = 0.0;
  double f_std = 0.0;
  double f_mode = 0.0;
  // mode of the next frame minus mode of this one; absent on the last frame
  std::optional<double> delta_f_mode;

  bool operator==(const FrameFeatures&) const = default;
};

enum class FeatureKind : std::uint8_t {
  MeanStd2D = 0,
  Mode1D = 1,
  ModeDelta2D = 2,
  Summary6 = 3,
};

// CLI names: meanstd2d, mode1d, modedelta2d, summary6.
std::string_view feature_kind_name(FeatureKind kind);
FeatureKind parse_feature_kind(std::string_view name);

struct HistogramAxis {
  std::uint32_t bins = 0;
  double lo = 0.0;
  double hi = 0.0;

  // Values outside [lo, hi) land in the nearest edge bin.
  std::uint32_t bin_of(double value) const;
  bool operator==(const HistogramAxis&) const = default;
};

struct HistogramSpec {
  FeatureKind kind = FeatureKind::Mode1D;
  HistogramAxis axis1;
  std::optional<HistogramAxis> axis2;

  static HistogramSpec for_kind(FeatureKind kind);
  std::uint32_t dimension() const { return axis1.bins * (axis2 ? axis2->bins : 1u); }
  bool operator==(const HistogramSpec&) const = default;
};

bool is_histogram_kind(FeatureKind kind);

/// Instance representation used by the classifier. Histograms are kept as
/// sparse integer counts (every histogram in the pipeline is built from
/// whole frames), with unit-mass values derived from them.
class FeatureVector {
 public:
  static FeatureVector histogram(FeatureKind kind, std::vector<std::uint32_t> indices,
                                 std::vector<std::uint32_t> counts);
  static FeatureVector summary(const std::array<double, 6>& values);

  FeatureKind kind() const { return kind_; }
  bool is_histogram() const { return kind_ != FeatureKind::Summary6; }

  std::span<const std::uint32_t> indices() const { return indices_; }
  std::span<const std::uint32_t> counts() const { return counts_; }
  std::span<const double> masses() const { return masses_; }
  std::uint64_t total_count() const { return total_; }
  const std::array<double, 6>& summary_values() const { return summary_; }

  std::uint32_t dimension() const;
  std::vector<double> dense() const;

  bool operator==(const FeatureVector&) const = default;

 private:
  FeatureKind kind_ = FeatureKind::Mode1D;
  std::vector<std::uint32_t> indices_;
  std::vector<std::uint32_t> counts_;
  std::vector<double> masses_;
  std::uint64_t total_ = 0;
  std::array<double, 6> summary_{};
};

/// Per-frame spectral statistics of the unit-sum magnitude spectrum.
/// Silent frames are treated as a flat spectrum.
std::vector<FrameFeatures> frame_features(const Spectrogram& spec);

FeatureVector aggregate_histogram(std::span<const FrameFeatures> feats, FeatureKind kind);

/// 5th/50th/95th percentiles of f_mode and 50th/75th/95th of delta f_mode.
FeatureVector aggregate_summary(std::span<const FrameFeatures> feats);

FeatureVector aggregate(std::span<const FrameFeatures> feats, FeatureKind kind);

}  // namespace chorus

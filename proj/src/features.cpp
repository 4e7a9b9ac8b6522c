#include "chorus/features.hpp"

#include <algorithm>
#include <cmath>

#include "chorus/error.hpp"
#include "chorus/stats.hpp"

namespace chorus {

std::string_view feature_kind_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::MeanStd2D: return "meanstd2d";
    case FeatureKind::Mode1D: return "mode1d";
    case FeatureKind::ModeDelta2D: return "modedelta2d";
    case FeatureKind::Summary6: return "summary6";
  }
  return "unknown";
}

FeatureKind parse_feature_kind(std::string_view name) {
  for (auto kind : {FeatureKind::MeanStd2D, FeatureKind::Mode1D, FeatureKind::ModeDelta2D,
                    FeatureKind::Summary6}) {
    if (feature_kind_name(kind) == name) return kind;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown feature kind '" + std::string(name) + "'");
}

bool is_histogram_kind(FeatureKind kind) { return kind != FeatureKind::Summary6; }

std::uint32_t HistogramAxis::bin_of(double value) const {
  const double pos = std::floor((value - lo) * bins / (hi - lo));
  if (!(pos >= 0.0)) return 0;  // also catches NaN
  if (pos >= bins) return bins - 1;
  return static_cast<std::uint32_t>(pos);
}

HistogramSpec HistogramSpec::for_kind(FeatureKind kind) {
  const HistogramAxis band100{100, kBandLowHz, kBandHighHz};
  switch (kind) {
    case FeatureKind::MeanStd2D:
      return {kind, band100, HistogramAxis{50, kBandLowHz, kBandHighHz}};
    case FeatureKind::Mode1D:
      return {kind, band100, std::nullopt};
    case FeatureKind::ModeDelta2D:
      return {kind, band100, HistogramAxis{50, -2000.0, 2000.0}};
    case FeatureKind::Summary6:
      break;
  }
  throw Error(ErrorKind::SpecMismatch, "summary6 has no histogram layout");
}

FeatureVector FeatureVector::histogram(FeatureKind kind, std::vector<std::uint32_t> indices,
                                       std::vector<std::uint32_t> counts) {
  const std::uint32_t dim = HistogramSpec::for_kind(kind).dimension();
  if (indices.size() != counts.size()) {
    throw Error(ErrorKind::InvalidArgument, "indices and counts differ in length");
  }
  if (indices.empty()) throw Error(ErrorKind::EmptyInput, "histogram with no mass");
  FeatureVector v;
  v.kind_ = kind;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= dim || (i > 0 && indices[i] <= indices[i - 1])) {
      throw Error(ErrorKind::InvalidArgument, "histogram indices must be increasing and < " +
                                                  std::to_string(dim));
    }
    if (counts[i] == 0) throw Error(ErrorKind::InvalidArgument, "zero count stored sparsely");
    v.total_ += counts[i];
  }
  v.masses_.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    v.masses_[i] = static_cast<double>(counts[i]) / static_cast<double>(v.total_);
  }
  v.indices_ = std::move(indices);
  v.counts_ = std::move(counts);
  return v;
}

FeatureVector FeatureVector::summary(const std::array<double, 6>& values) {
  FeatureVector v;
  v.kind_ = FeatureKind::Summary6;
  v.summary_ = values;
  return v;
}

std::uint32_t FeatureVector::dimension() const {
  return is_histogram() ? HistogramSpec::for_kind(kind_).dimension() : 6u;
}

std::vector<double> FeatureVector::dense() const {
  if (!is_histogram()) return {summary_.begin(), summary_.end()};
  std::vector<double> out(dimension(), 0.0);
  for (std::size_t i = 0; i < indices_.size(); ++i) out[indices_[i]] = masses_[i];
  return out;
}

std::vector<FrameFeatures> frame_features(const Spectrogram& spec) {
  const std::size_t n_frames = spec.n_frames();
  const std::size_t n_bins = spec.n_bins();
  std::vector<FrameFeatures> out(n_frames);
  if (n_bins == 0) return out;

  for (std::size_t f = 0; f < n_frames; ++f) {
    auto mags = spec.frame(f);
    double total = 0.0;
    std::size_t argmax = 0;
    for (std::size_t b = 0; b < n_bins; ++b) {
      total += mags[b];
      if (mags[b] > mags[argmax]) argmax = b;
    }

    const double uniform = 1.0 / static_cast<double>(n_bins);
    auto weight = [&](std::size_t b) { return total > 0.0 ? mags[b] / total : uniform; };

    double mean = 0.0;
    for (std::size_t b = 0; b < n_bins; ++b) mean += weight(b) * spec.freqs[b];
    double var = 0.0;
    for (std::size_t b = 0; b < n_bins; ++b) {
      const double d = spec.freqs[b] - mean;
      var += weight(b) * d * d;
    }
    out[f].f_mean = mean;
    out[f].f_std = std::sqrt(std::max(var, 0.0));
    out[f].f_mode = spec.freqs[argmax];
  }
  for (std::size_t f = 0; f + 1 < n_frames; ++f) {
    out[f].delta_f_mode = out[f + 1].f_mode - out[f].f_mode;
  }
  return out;
}

FeatureVector aggregate_histogram(std::span<const FrameFeatures> feats, FeatureKind kind) {
  const HistogramSpec spec = HistogramSpec::for_kind(kind);
  std::vector<std::uint32_t> dense(spec.dimension(), 0);
  std::size_t used = 0;
  for (const auto& ff : feats) {
    std::uint32_t index = 0;
    switch (kind) {
      case FeatureKind::MeanStd2D:
        index = spec.axis1.bin_of(ff.f_mean) * spec.axis2->bins + spec.axis2->bin_of(ff.f_std);
        break;
      case FeatureKind::Mode1D:
        index = spec.axis1.bin_of(ff.f_mode);
        break;
      case FeatureKind::ModeDelta2D:
        if (!ff.delta_f_mode) continue;
        index = spec.axis1.bin_of(ff.f_mode) * spec.axis2->bins + spec.axis2->bin_of(*ff.delta_f_mode);
        break;
      case FeatureKind::Summary6:
        break;
    }
    ++dense[index];
    ++used;
  }
  if (used == 0) throw Error(ErrorKind::EmptyInput, "no frames to aggregate");

  std::vector<std::uint32_t> indices;
  std::vector<std::uint32_t> counts;
  for (std::uint32_t i = 0; i < dense.size(); ++i) {
    if (dense[i] == 0) continue;
    indices.push_back(i);
    counts.push_back(dense[i]);
  }
  return FeatureVector::histogram(kind, std::move(indices), std::move(counts));
}

FeatureVector aggregate_summary(std::span<const FrameFeatures> feats) {
  if (feats.empty()) throw Error(ErrorKind::EmptyInput, "no frames to summarise");
  std::vector<double> modes;
  std::vector<double> deltas;
  modes.reserve(feats.size());
  for (const auto& ff : feats) {
    modes.push_back(ff.f_mode);
    if (ff.delta_f_mode) deltas.push_back(*ff.delta_f_mode);
  }
  if (deltas.empty()) throw Error(ErrorKind::NoDeltas, "no frame has a successor");

  constexpr std::array<double, 3> kModeQ{0.05, 0.50, 0.95};
  constexpr std::array<double, 3> kDeltaQ{0.50, 0.75, 0.95};
  auto m = quantiles(modes, kModeQ);
  auto d = quantiles(deltas, kDeltaQ);
  return FeatureVector::summary({m[0], m[1], m[2], d[0], d[1], d[2]});
}

FeatureVector aggregate(std::span<const FrameFeatures> feats, FeatureKind kind) {
  if (kind == FeatureKind::Summary6) return aggregate_summary(feats);
  return aggregate_histogram(feats, kind);
}

}  // namespace chorus

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chorus/features.hpp"

namespace chorus {

inline constexpr std::uint16_t kStoreVersion = 1;
inline constexpr std::size_t kDefaultInstanceFrames = 100;

/// Selected frame features of one training recording.
struct RecordingFrames {
  std::string recording_id;
  std::vector<FrameFeatures> frames;
};

using FrameBlock = std::vector<FrameFeatures>;

/// Lines up the recordings of one class (ordered by recording id) and cuts
/// the sequence into consecutive blocks of `instance_frames`. Blocks may
/// straddle recordings; the remainder is dropped.
std::vector<FrameBlock> assemble_instances(std::vector<RecordingFrames> recordings,
                                           std::size_t instance_frames = kDefaultInstanceFrames);

struct ClassInfo {
  std::string label;
  std::uint32_t n_instances = 0;
  bool operator==(const ClassInfo&) const = default;
};

class TrainingStore {
 public:
  TrainingStore() = default;
  // Instances are grouped by class: class c owns instances
  // [c * per_class, (c + 1) * per_class).
  TrainingStore(FeatureKind kind, std::uint32_t instance_frames, std::uint64_t seed,
                std::vector<std::string> labels, std::vector<FeatureVector> instances);

  FeatureKind feature_kind() const { return kind_; }
  std::uint32_t instance_frames() const { return instance_frames_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t n_classes() const { return labels_.size(); }
  std::uint32_t per_class() const { return per_class_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::vector<ClassInfo> class_table() const;
  std::optional<std::uint32_t> class_id(std::string_view label) const;

  std::size_t size() const { return instances_.size(); }
  const FeatureVector& instance(std::size_t i) const { return instances_[i]; }
  std::uint32_t class_of(std::size_t i) const { return static_cast<std::uint32_t>(i / per_class_); }
  std::span<const FeatureVector> instances_of(std::uint32_t class_id) const {
    return {instances_.data() + static_cast<std::size_t>(class_id) * per_class_, per_class_};
  }
  std::span<const FeatureVector> instances() const { return instances_; }

  bool operator==(const TrainingStore&) const = default;

 private:
  FeatureKind kind_ = FeatureKind::Mode1D;
  std::uint32_t instance_frames_ = static_cast<std::uint32_t>(kDefaultInstanceFrames);
  std::uint64_t seed_ = 0;
  std::uint32_t per_class_ = 0;
  std::vector<std::string> labels_;
  std::vector<FeatureVector> instances_;
};

/// Draws `target` blocks per class without replacement (default: the size
/// of the smallest class). Class ids follow the lexicographic order of the
/// labels; drawn blocks keep their original relative order.
TrainingStore balance_subsample(const std::map<std::string, std::vector<FeatureVector>>& per_class,
                                std::optional<std::size_t> target, std::uint64_t seed,
                                FeatureKind kind,
                                std::uint32_t instance_frames = kDefaultInstanceFrames);

/// Indices of `target` distinct draws from [0, n), ascending. Deterministic
/// for a given engine state on every platform.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t target,
                                                    std::uint64_t seed);

std::vector<std::uint8_t> serialize_store(const TrainingStore& store);
TrainingStore deserialize_store(std::span<const std::uint8_t> bytes);

void save_store(const TrainingStore& store, std::ostream& sink);
TrainingStore load_store(std::istream& source);
void save_store_file(const TrainingStore& store, const std::string& path);
TrainingStore load_store_file(const std::string& path);

}  // namespace chorus

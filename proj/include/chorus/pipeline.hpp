#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chorus/dsp.hpp"
#include "chorus/eval.hpp"
#include "chorus/features.hpp"
#include "chorus/knn.hpp"
#include "chorus/trainstore.hpp"

namespace chorus {

/// A recording whose audio is loaded on demand.
struct AudioSource {
  std::string species;
  std::string recording_id;
  std::function<AudioClip()> load;
};

struct BuildOptions {
  FeatureKind kind = FeatureKind::Mode1D;
  std::size_t instance_frames = kDefaultInstanceFrames;
  std::optional<std::size_t> target;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

struct BuildSummary {
  std::map<std::string, std::size_t> total_frames;
  std::map<std::string, std::size_t> selected_frames;
  std::map<std::string, std::size_t> blocks;
  std::vector<std::string> excluded;  // too few selected frames for one instance
  std::size_t target = 0;
};

/// Frame features of the frames kept by the power threshold, with their
/// deltas taken against the original successor.
std::vector<FrameFeatures> selected_frame_features(const AudioClip& clip);

/// Training path: spectrogram, frame selection, features, blocks, balancing.
TrainingStore build_store(std::span<const AudioSource> sources, const BuildOptions& options,
                          BuildSummary* summary = nullptr);

/// Query path: every frame of the recording, no selection.
FeatureVector query_features(const AudioClip& clip, FeatureKind kind);

struct TestItem {
  std::uint32_t true_class = 0;
  AudioSource source;
};

std::vector<LabeledResult> classify_sources(std::span<const TestItem> items, const TrainingStore& store,
                                            const ClassifierConfig& cfg, std::size_t jobs = 1);

}  // namespace chorus

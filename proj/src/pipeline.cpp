#include "chorus/pipeline.hpp"

#include "chorus/error.hpp"
#include "chorus/frame_select.hpp"
#include "chorus/parallel.hpp"

namespace chorus {

std::vector<FrameFeatures> selected_frame_features(const AudioClip& clip) {
  const Spectrogram spec = compute_spectrogram(clip);
  const SelectionMask mask = select_frames(spec);
  auto all = frame_features(spec);
  std::vector<FrameFeatures> kept;
  kept.reserve(mask.count());
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (mask.selected[i]) kept.push_back(all[i]);
  }
  return kept;
}

TrainingStore build_store(std::span<const AudioSource> sources, const BuildOptions& options,
                          BuildSummary* summary) {
  struct Processed {
    std::size_t total = 0;
    std::vector<FrameFeatures> kept;
  };
  std::vector<Processed> processed(sources.size());
  parallel_for(sources.size(), options.jobs, [&](std::size_t i) {
    const AudioClip clip = sources[i].load();
    try {
      const Spectrogram spec = compute_spectrogram(clip);
      const SelectionMask mask = select_frames(spec);
      auto all = frame_features(spec);
      processed[i].total = all.size();
      for (std::size_t f = 0; f < all.size(); ++f) {
        if (mask.selected[f]) processed[i].kept.push_back(all[f]);
      }
    } catch (const Error& e) {
      throw Error(e.kind(), sources[i].species + " / " + sources[i].recording_id + ": " + e.what());
    }
  });

  BuildSummary local;
  std::map<std::string, std::vector<RecordingFrames>> by_species;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    local.total_frames[sources[i].species] += processed[i].total;
    local.selected_frames[sources[i].species] += processed[i].kept.size();
    by_species[sources[i].species].push_back({sources[i].recording_id, std::move(processed[i].kept)});
  }

  std::map<std::string, std::vector<FeatureVector>> per_class;
  for (auto& [species, recordings] : by_species) {
    std::vector<FrameBlock> blocks;
    try {
      blocks = assemble_instances(std::move(recordings), options.instance_frames);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::InsufficientFrames) throw;
      local.excluded.push_back(species);
      continue;
    }
    local.blocks[species] = blocks.size();
    std::vector<FeatureVector> vectors;
    vectors.reserve(blocks.size());
    for (const auto& block : blocks) {
      try {
        vectors.push_back(aggregate(block, options.kind));
      } catch (const Error& e) {
        throw Error(e.kind(), species + ": " + e.what());
      }
    }
    per_class.emplace(species, std::move(vectors));
  }

  TrainingStore store = balance_subsample(per_class, options.target, options.seed, options.kind,
                                          static_cast<std::uint32_t>(options.instance_frames));
  local.target = store.per_class();
  if (summary) *summary = std::move(local);
  return store;
}

FeatureVector query_features(const AudioClip& clip, FeatureKind kind) {
  const Spectrogram spec = compute_spectrogram(clip);
  return aggregate(frame_features(spec), kind);
}

std::vector<LabeledResult> classify_sources(std::span<const TestItem> items, const TrainingStore& store,
                                            const ClassifierConfig& cfg, std::size_t jobs) {
  std::vector<LabeledResult> results(items.size());
  parallel_for(items.size(), jobs, [&](std::size_t i) {
    const AudioClip clip = items[i].source.load();
    results[i].true_class = items[i].true_class;
    results[i].posterior = classify(query_features(clip, store.feature_kind()), store, cfg);
  });
  return results;
}

}  // namespace chorus

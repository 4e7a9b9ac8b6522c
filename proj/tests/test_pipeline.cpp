#include <catch2/catch_amalgamated.hpp>

#include "chorus/error.hpp"
#include "chorus/frame_select.hpp"
#include "chorus/pipeline.hpp"
#include "chorus/synth.hpp"
#include "oracles.hpp"

using namespace chorus;

namespace {

std::vector<AudioSource> sources_of(const std::vector<FixtureClip>& clips) {
  std::vector<AudioSource> out;
  for (const auto& c : clips) out.push_back({c.species, c.recording_id, [&c] { return c.clip; }});
  return out;
}

const Fixture& small_fixture() {
  static const Fixture fx = [] {
    FixtureSpec spec;
    spec.train_per_species = 8;
    spec.test_per_species = 4;
    return make_tone_fixture(spec);
  }();
  return fx;
}

}  // namespace

TEST_CASE("training frames come from the loud part of a clip", "[pipeline]") {
  // 0.5 s of a loud tone followed by 0.5 s of faint noise.
  std::mt19937_64 rng(1);
  auto samples = oracle::tone(4000.0, 0.5, 24000, 48000.0);
  auto quiet = synth_noise_clip(0.5, 48000, 0.001, rng);
  samples.insert(samples.end(), quiet.begin(), quiet.end());
  AudioClip clip{samples, 48000, "mixed"};

  auto kept = selected_frame_features(clip);
  REQUIRE(kept.size() >= 48);
  REQUIRE(kept.size() <= 50);
  for (const auto& f : kept) REQUIRE(std::abs(f.f_mode - 4000.0) <= 46.875);

  // The query path keeps everything.
  auto q = query_features(clip, FeatureKind::Mode1D);
  REQUIRE(q.total_count() == compute_spectrogram(clip).n_frames());
}

TEST_CASE("store building on the tone fixture", "[pipeline]") {
  const auto& fx = small_fixture();
  auto sources = sources_of(fx.train);

  BuildOptions opts;
  BuildSummary summary;
  auto store = build_store(sources, opts, &summary);
  REQUIRE(store.n_classes() == 3);
  REQUIRE(store.labels() == fx.species);
  std::size_t smallest = SIZE_MAX;
  for (const auto& sp : fx.species) {
    REQUIRE(summary.selected_frames[sp] <= summary.total_frames[sp]);
    REQUIRE(summary.blocks[sp] == summary.selected_frames[sp] / 100);
    smallest = std::min(smallest, summary.blocks[sp]);
  }
  REQUIRE(store.per_class() == smallest);
  REQUIRE(summary.target == smallest);
  REQUIRE(summary.excluded.empty());

  SECTION("thread count does not change the result") {
    opts.jobs = 3;
    REQUIRE(serialize_store(build_store(sources, opts)) == serialize_store(store));
  }

  SECTION("species with too few frames are excluded") {
    auto with_short = sources;
    AudioClip tiny{oracle::tone(3000.0, 0.5, 4800, 48000.0), 48000, "tiny"};
    with_short.push_back({"Brevis brevis", "tiny", [tiny] { return tiny; }});
    BuildSummary s2;
    auto s = build_store(with_short, opts, &s2);
    REQUIRE(s2.excluded == std::vector<std::string>{"Brevis brevis"});
    REQUIRE(s.n_classes() == 3);
  }

  SECTION("every feature kind builds") {
    for (auto kind : {FeatureKind::MeanStd2D, FeatureKind::ModeDelta2D, FeatureKind::Summary6}) {
      opts.kind = kind;
      opts.instance_frames = 50;
      auto s = build_store(sources, opts);
      REQUIRE(s.feature_kind() == kind);
      REQUIRE(s.per_class() >= 2 * store.per_class());
    }
  }
}

TEST_CASE("tone fixture test clips are recognised", "[pipeline]") {
  const auto& fx = small_fixture();
  auto store = build_store(sources_of(fx.train), BuildOptions{});
  std::vector<TestItem> items;
  for (const auto& c : fx.test) {
    items.push_back({*store.class_id(c.species), {c.species, c.recording_id, [&c] { return c.clip; }}});
  }
  auto results = classify_sources(items, store, ClassifierConfig{}, 2);
  REQUIRE(results.size() == 12);
  REQUIRE(accuracy_at_n(results, 1) == 1.0);
  for (std::uint32_t c = 0; c < 3; ++c) REQUIRE(auc_roc_one_vs_all(results, c) == 1.0);
}

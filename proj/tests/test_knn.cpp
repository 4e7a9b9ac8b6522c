#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "chorus/error.hpp"
#include "chorus/knn.hpp"
#include "oracles.hpp"

using namespace chorus;
using Catch::Approx;

namespace {

FeatureVector hist(std::vector<std::uint32_t> idx, std::vector<std::uint32_t> counts,
                   FeatureKind kind = FeatureKind::Mode1D) {
  return FeatureVector::histogram(kind, std::move(idx), std::move(counts));
}

// Ten-frame histogram with `a` frames in bin 0 and the rest in `other`.
FeatureVector split(std::uint32_t a, std::uint32_t other) {
  if (a == 0) return hist({other}, {10});
  if (a == 10) return hist({0}, {10});
  return hist({0, other}, {a, 10 - a});
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;
}

FeatureVector random_hist(std::mt19937_64& rng, FeatureKind kind, std::uint32_t frames) {
  const auto dim = HistogramSpec::for_kind(kind).dimension();
  // Concentrate mass on a few bins so that collisions and ties happen.
  std::uniform_int_distribution<std::uint32_t> centre(0, dim - 1);
  std::uniform_int_distribution<int> offset(-3, 3);
  std::map<std::uint32_t, std::uint32_t> counts;
  const auto c = centre(rng);
  for (std::uint32_t f = 0; f < frames; ++f) {
    const auto b = static_cast<std::uint32_t>(std::clamp<long>(static_cast<long>(c) + offset(rng), 0, dim - 1));
    ++counts[b];
  }
  std::vector<std::uint32_t> idx, cnt;
  for (auto [i, n] : counts) {
    idx.push_back(i);
    cnt.push_back(n);
  }
  return hist(idx, cnt, kind);
}

TrainingStore random_store(std::mt19937_64& rng, FeatureKind kind, std::size_t classes, std::size_t per,
                           std::uint32_t frames) {
  std::vector<std::string> labels;
  std::vector<FeatureVector> inst;
  for (std::size_t c = 0; c < classes; ++c) {
    labels.push_back("class " + std::to_string(100 + c));
    for (std::size_t i = 0; i < per; ++i) inst.push_back(random_hist(rng, kind, frames));
  }
  return TrainingStore(kind, frames, 0, labels, inst);
}

}  // namespace

TEST_CASE("distances on small examples", "[knn][distance]") {
  auto a = hist({0, 1}, {1, 1});
  auto b = hist({0, 1}, {1, 3});
  auto c = hist({5, 9}, {2, 2});

  for (auto m : {Metric::L1, Metric::KL, Metric::Hellinger}) REQUIRE(distance(a, a, m) == 0.0);
  REQUIRE(distance(a, b, Metric::L1) == Approx(0.5));
  REQUIRE(distance(a, c, Metric::L1) == Approx(2.0));
  REQUIRE(distance(a, c, Metric::Hellinger) == Approx(1.0));
  REQUIRE(distance(a, b, Metric::Hellinger) ==
          Approx(1.0 - std::sqrt(0.5 * 0.25) - std::sqrt(0.5 * 0.75)));
  REQUIRE(distance(a, b, Metric::KL) == Approx(0.5 * std::log(2.0) + 0.5 * std::log(0.5 / 0.75)).epsilon(1e-6));
  REQUIRE(distance(a, c, Metric::KL) > 15.0);  // disjoint support, bounded by the smoothing

  for (auto m : {Metric::L1, Metric::KL, Metric::Hellinger}) REQUIRE(parse_metric(metric_name(m)) == m);
  REQUIRE(kind_of([] { parse_metric("cosine"); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("distances agree with dense references", "[knn][distance][property]") {
  std::mt19937_64 rng(11);
  for (auto kind : {FeatureKind::Mode1D, FeatureKind::MeanStd2D, FeatureKind::ModeDelta2D}) {
    for (int trial = 0; trial < 100; ++trial) {
      auto x = random_hist(rng, kind, 1 + trial);
      auto y = random_hist(rng, kind, 100);
      auto dx = x.dense();
      auto dy = y.dense();
      REQUIRE(distance(x, y, Metric::L1) == Approx(oracle::dense_l1(dx, dy)).margin(1e-12));
      REQUIRE(distance(x, y, Metric::KL) == Approx(oracle::dense_kl(dx, dy, kKlEpsilon)).margin(1e-9));
      REQUIRE(distance(x, y, Metric::Hellinger) == Approx(oracle::dense_hellinger(dx, dy)).margin(1e-12));
      REQUIRE(distance(x, y, Metric::L1) == Approx(distance(y, x, Metric::L1)).margin(1e-12));
      REQUIRE(distance(x, y, Metric::L1) <= 2.0 + 1e-12);
      REQUIRE(distance(x, y, Metric::Hellinger) <= 1.0);
    }
  }
}

TEST_CASE("summary vectors only support L1", "[knn][distance]") {
  auto s = FeatureVector::summary({1, 2, 3, 4, 5, 6});
  auto t = FeatureVector::summary({2, 2, 3, 4, 5, 3});
  REQUIRE(distance(s, t, Metric::L1) == 4.0);
  REQUIRE(kind_of([&] { distance(s, t, Metric::KL); }) == ErrorKind::SpecMismatch);
  REQUIRE(kind_of([&] { distance(s, t, Metric::Hellinger); }) == ErrorKind::SpecMismatch);
  REQUIRE(kind_of([&] { distance(s, hist({1}, {1}), Metric::L1); }) == ErrorKind::SpecMismatch);
}

TEST_CASE("voting, entropy and ranking", "[knn]") {
  // Distances to the query: A .2 .4 .6, B .8 1.0 1.8, C 2 2 2.
  TrainingStore store(FeatureKind::Mode1D, 10, 0, {"A", "B", "C"},
                      {split(9, 50), split(8, 50), split(7, 50), split(6, 60), split(5, 60), split(1, 60),
                       split(0, 70), split(0, 71), split(0, 72)});
  const auto query = hist({0}, {10});

  auto post = classify(query, store, {});
  REQUIRE(post.classes == std::vector<std::uint32_t>{0, 1, 2});
  REQUIRE(post.probs == std::vector<double>{0.6, 0.4, 0.0});
  REQUIRE(post.entropy == Approx(0.673).margin(5e-4));
  REQUIRE(post.entropy == Approx(oracle::entropy(post.probs)));
  REQUIRE(post.normalized_entropy == Approx(post.entropy / std::log(3.0)));
  REQUIRE(post.ranking == std::vector<std::uint32_t>{0, 1, 2});
  REQUIRE(post.nearest_order == std::vector<std::uint32_t>{0, 1, 2});
  REQUIRE(post.neighbours.size() == 5);
  REQUIRE(post.neighbours[0] == Neighbour{0, 0, post.neighbours[0].distance});
  REQUIRE(post.neighbours[0].distance == Approx(0.2));
  REQUIRE(post.neighbours[4].instance == 4);
  REQUIRE(post.rank_of(1) == 2u);
  REQUIRE(post.prob_of(2) == 0.0);

  SECTION("one candidate is certain") {
    ClassifierConfig cfg;
    cfg.k = 3;
    cfg.candidate_classes = std::vector<std::uint32_t>{2};
    auto p = classify(query, store, cfg);
    REQUIRE(p.probs == std::vector<double>{1.0});
    REQUIRE(p.entropy == 0.0);
    REQUIRE(p.normalized_entropy == 0.0);
    REQUIRE(p.ranking == std::vector<std::uint32_t>{2});
    REQUIRE_FALSE(p.rank_of(0));
    REQUIRE(rejection_decision(p, 0.0) == Decision::Accept);
  }

  SECTION("candidate filtering changes the voters") {
    ClassifierConfig cfg;
    cfg.candidate_classes = std::vector<std::uint32_t>{2, 1};
    auto p = classify(query, store, cfg);
    REQUIRE(p.classes == std::vector<std::uint32_t>{1, 2});
    REQUIRE(p.probs == std::vector<double>{0.6, 0.4});
    for (const auto& n : p.neighbours) REQUIRE(n.class_id != 0);
  }

  SECTION("rejection uses the normalised entropy") {
    REQUIRE(rejection_decision(post, 0.5) == Decision::Reject);
    REQUIRE(rejection_decision(post, 0.62) == Decision::Accept);
  }
}

TEST_CASE("tie bias favours the class with the nearest instance", "[knn][bias]") {
  const std::vector<double> probs{0.4, 0.4, 0.2};
  const std::vector<std::size_t> order{1, 0, 2};
  auto biased = add_tie_bias(probs, order, 5, 2.0);
  REQUIRE(biased[1] == Approx(0.5));
  REQUIRE(biased[0] == Approx(0.45));
  REQUIRE(biased[2] == Approx(0.2));

  // The largest bias is below one vote, so it never overturns a vote count.
  for (std::size_t k : {1u, 3u, 5u, 10u}) {
    for (double m : {1.01, 2.0, 10.0}) {
      auto b = add_tie_bias(std::vector<double>{0.0, 1.0 / static_cast<double>(k)}, std::vector<std::size_t>{0, 1}, k, m);
      REQUIRE(b[0] < b[1]);
    }
  }
  REQUIRE(kind_of([] { add_tie_bias(std::vector<double>{0.5, 0.5}, std::vector<std::size_t>{0, 1}, 2, 1.0); }) ==
          ErrorKind::InvalidArgument);

  // Classify: one vote each, the class whose instance is nearer comes first
  // regardless of id.
  TrainingStore store(FeatureKind::Mode1D, 10, 0, {"A", "B"}, {split(5, 50), split(8, 60)});
  ClassifierConfig cfg;
  cfg.k = 2;
  auto p = classify(hist({0}, {10}), store, cfg);
  REQUIRE(p.probs == std::vector<double>{0.5, 0.5});
  REQUIRE(p.ranking == std::vector<std::uint32_t>{1, 0});
  REQUIRE(p.biased_scores[1] == Approx(0.5 + 1.0 / 4.0));
  REQUIRE(p.biased_scores[0] == Approx(0.5));
}

TEST_CASE("classifier errors", "[knn]") {
  TrainingStore store(FeatureKind::Mode1D, 10, 0, {"A", "B"}, {split(5, 50), split(8, 60)});
  const auto q = hist({0}, {10});
  auto cfg_with = [](auto fn) {
    ClassifierConfig c;
    fn(c);
    return c;
  };
  REQUIRE(kind_of([&] { classify(q, store, cfg_with([](auto& c) { c.k = 3; })); }) == ErrorKind::KTooLarge);
  REQUIRE(kind_of([&] { classify(q, store, cfg_with([](auto& c) { c.k = 0; })); }) == ErrorKind::InvalidArgument);
  REQUIRE(kind_of([&] { classify(q, store, cfg_with([](auto& c) { c.k = 1; c.tie_bias_m = 1.0; })); }) ==
          ErrorKind::InvalidArgument);
  REQUIRE(kind_of([&] {
            classify(q, store, cfg_with([](auto& c) { c.k = 1; c.candidate_classes = std::vector<std::uint32_t>{}; }));
          }) == ErrorKind::EmptyCandidates);
  REQUIRE(kind_of([&] {
            classify(q, store, cfg_with([](auto& c) { c.k = 1; c.candidate_classes = std::vector<std::uint32_t>{7}; }));
          }) == ErrorKind::InvalidArgument);
  REQUIRE(kind_of([&] { classify(hist({0}, {1}, FeatureKind::MeanStd2D), store, cfg_with([](auto& c) { c.k = 1; })); }) ==
          ErrorKind::SpecMismatch);

  TrainingStore summary(FeatureKind::Summary6, 10, 0, {"A"}, {FeatureVector::summary({})});
  REQUIRE(kind_of([&] {
            classify(FeatureVector::summary({}), summary, cfg_with([](auto& c) { c.k = 1; c.metric = Metric::KL; }));
          }) == ErrorKind::SpecMismatch);
}

TEST_CASE("pruned search matches exhaustive search", "[knn][property]") {
  std::mt19937_64 rng(31337);
  for (auto kind : {FeatureKind::Mode1D, FeatureKind::ModeDelta2D}) {
    for (auto metric : {Metric::L1, Metric::KL, Metric::Hellinger}) {
      for (int trial = 0; trial < 15; ++trial) {
        const std::size_t classes = 2 + static_cast<std::size_t>(trial % 6);
        auto store = random_store(rng, kind, classes, 4, 20);
        auto query = random_hist(rng, kind, 30);
        ClassifierConfig cfg;
        cfg.metric = metric;
        cfg.k = 1 + static_cast<std::size_t>(trial % 7);

        std::vector<oracle::Scored> all;
        std::vector<double> class_min(classes, std::numeric_limits<double>::infinity());
        for (std::size_t i = 0; i < store.size(); ++i) {
          const double d = distance(query, store.instance(i), metric);
          all.push_back({d, store.class_of(i), i});
          class_min[store.class_of(i)] = std::min(class_min[store.class_of(i)], d);
        }
        auto expected = oracle::exhaustive_knn(all, cfg.k);
        auto post = classify(query, store, cfg);
        REQUIRE(post.neighbours.size() == expected.size());
        for (std::size_t i = 0; i < expected.size(); ++i) {
          REQUIRE(post.neighbours[i].instance == expected[i].instance);
          REQUIRE(post.neighbours[i].distance == expected[i].distance);
        }
        double total = 0.0;
        for (double p : post.probs) total += p;
        REQUIRE(total == Approx(1.0));
        for (std::size_t j = 1; j < post.nearest_order.size(); ++j) {
          REQUIRE(class_min[post.nearest_order[j - 1]] <= class_min[post.nearest_order[j]]);
        }
        REQUIRE(post.normalized_entropy >= 0.0);
        REQUIRE(post.normalized_entropy <= 1.0);
      }
    }
  }
}

TEST_CASE("a candidate subset behaves like a store of that subset", "[knn][property]") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto store = random_store(rng, FeatureKind::Mode1D, 6, 5, 25);
    const std::vector<std::uint32_t> subset{1, 3, 4};
    std::vector<std::string> labels;
    std::vector<FeatureVector> inst;
    for (auto c : subset) {
      labels.push_back(store.labels()[c]);
      for (const auto& v : store.instances_of(c)) inst.push_back(v);
    }
    TrainingStore reduced(FeatureKind::Mode1D, 25, 0, labels, inst);

    auto query = random_hist(rng, FeatureKind::Mode1D, 40);
    ClassifierConfig full_cfg;
    full_cfg.k = 4;
    full_cfg.candidate_classes = subset;
    ClassifierConfig reduced_cfg;
    reduced_cfg.k = 4;

    auto a = classify(query, store, full_cfg);
    auto b = classify(query, reduced, reduced_cfg);
    REQUIRE(a.probs == b.probs);
    REQUIRE(a.biased_scores == b.biased_scores);
    REQUIRE(a.entropy == b.entropy);
    for (std::size_t i = 0; i < a.ranking.size(); ++i) REQUIRE(a.ranking[i] == subset[b.ranking[i]]);
    for (std::size_t i = 0; i < a.neighbours.size(); ++i) {
      REQUIRE(a.neighbours[i].distance == b.neighbours[i].distance);
      REQUIRE(a.neighbours[i].class_id == subset[b.neighbours[i].class_id]);
    }
  }
}

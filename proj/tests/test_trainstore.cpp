#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "chorus/error.hpp"
#include "chorus/trainstore.hpp"

using namespace chorus;

namespace {

// Distinct mode1d instances, so equality identifies where a stored one came from.
FeatureVector tagged(std::size_t tag) {
  const auto lo = static_cast<std::uint32_t>(tag % 100);
  const auto count = static_cast<std::uint32_t>(tag / 100 + 1);
  if (lo == 99) return FeatureVector::histogram(FeatureKind::Mode1D, {lo}, {count});
  return FeatureVector::histogram(FeatureKind::Mode1D, {lo, 99}, {count, 1});
}

std::vector<FeatureVector> tagged_range(std::size_t from, std::size_t n) {
  std::vector<FeatureVector> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(tagged(from + i));
  return out;
}

RecordingFrames recording(std::string id, std::size_t n, double mode) {
  RecordingFrames r{std::move(id), {}};
  for (std::size_t i = 0; i < n; ++i) r.frames.push_back({mode, 0.0, mode, std::nullopt});
  return r;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;
}

TrainingStore sample_store() {
  std::map<std::string, std::vector<FeatureVector>> per_class{
      {"Parus major", tagged_range(0, 30)},
      {"Erithacus rubecula", tagged_range(1000, 25)},
      {"Turdus merula", tagged_range(2000, 40)},
  };
  return balance_subsample(per_class, std::nullopt, 77, FeatureKind::Mode1D);
}

}  // namespace

TEST_CASE("recordings are cut into fixed-size blocks", "[trainstore]") {
  REQUIRE(assemble_instances({recording("a", 1830, 2000)}).size() == 18);
  REQUIRE(assemble_instances({recording("a", 100, 2000)}).size() == 1);
  REQUIRE(kind_of([] { assemble_instances({recording("a", 99, 2000)}); }) == ErrorKind::InsufficientFrames);

  // Recordings are concatenated in id order, so a block may span two of them.
  auto blocks = assemble_instances({recording("b", 100, 3000), recording("a", 150, 2000)});
  REQUIRE(blocks.size() == 2);
  REQUIRE(blocks[0].front().f_mode == 2000);
  REQUIRE(blocks[0].back().f_mode == 2000);
  REQUIRE(blocks[1][49].f_mode == 2000);
  REQUIRE(blocks[1][50].f_mode == 3000);

  auto small = assemble_instances({recording("x", 25, 1), recording("y", 25, 2)}, 10);
  REQUIRE(small.size() == 5);
  for (const auto& b : small) REQUIRE(b.size() == 10);
}

TEST_CASE("balancing draws the same count from every class", "[trainstore]") {
  std::map<std::string, std::vector<FeatureVector>> per_class{
      {"b", tagged_range(0, 18)},
      {"a", tagged_range(1000, 40)},
      {"c", tagged_range(2000, 500)},
  };
  auto store = balance_subsample(per_class, std::nullopt, 1, FeatureKind::Mode1D);
  REQUIRE(store.per_class() == 18);
  REQUIRE(store.size() == 54);
  REQUIRE(store.labels() == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(store.class_id("c") == 2u);
  REQUIRE_FALSE(store.class_id("d"));

  // The smallest class is taken whole.
  for (std::size_t i = 0; i < 18; ++i) REQUIRE(store.instances_of(1)[i] == tagged(i));

  // No block is drawn twice, and every stored block comes from its own class.
  for (std::uint32_t c = 0; c < 3; ++c) {
    const auto& source = per_class.at(store.labels()[c]);
    std::set<std::size_t> seen;
    for (const auto& v : store.instances_of(c)) {
      auto it = std::find(source.begin(), source.end(), v);
      REQUIRE(it != source.end());
      REQUIRE(seen.insert(static_cast<std::size_t>(it - source.begin())).second);
    }
  }

  REQUIRE(kind_of([&] { balance_subsample(per_class, 19, 1, FeatureKind::Mode1D); }) == ErrorKind::TargetTooLarge);
  auto five = balance_subsample(per_class, 5, 1, FeatureKind::Mode1D);
  REQUIRE(five.size() == 15);

  std::map<std::string, std::vector<FeatureVector>> big{{"x", tagged_range(0, 300)}, {"y", tagged_range(5000, 250)}};
  REQUIRE(balance_subsample(big, 200, 9, FeatureKind::Mode1D).per_class() == 200);
}

TEST_CASE("balancing is reproducible from the seed", "[trainstore]") {
  REQUIRE(sample_store() == sample_store());
  std::map<std::string, std::vector<FeatureVector>> per_class{{"a", tagged_range(0, 50)}, {"b", tagged_range(100, 50)}};
  auto s1 = balance_subsample(per_class, 10, 1, FeatureKind::Mode1D);
  auto s2 = balance_subsample(per_class, 10, 2, FeatureKind::Mode1D);
  REQUIRE_FALSE(s1 == s2);
}

TEST_CASE("sampling without replacement", "[trainstore][property]") {
  REQUIRE(sample_without_replacement(10, 10, 3) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  REQUIRE(sample_without_replacement(10, 0, 3).empty());
  REQUIRE(kind_of([] { sample_without_replacement(3, 4, 0); }) == ErrorKind::TargetTooLarge);

  // Every index is equally likely to be drawn.
  const std::size_t n = 20;
  const std::size_t target = 5;
  const int trials = 20000;
  std::vector<int> hits(n, 0);
  for (int seed = 0; seed < trials; ++seed) {
    auto s = sample_without_replacement(n, target, static_cast<std::uint64_t>(seed));
    REQUIRE(s.size() == target);
    REQUIRE(std::is_sorted(s.begin(), s.end()));
    REQUIRE(std::adjacent_find(s.begin(), s.end()) == s.end());
    for (auto i : s) ++hits[i];
  }
  const double expected = static_cast<double>(trials) * target / n;
  const double sigma = std::sqrt(expected * (1.0 - static_cast<double>(target) / n));
  for (int h : hits) REQUIRE(std::abs(h - expected) < 5.0 * sigma);
}

TEST_CASE("store serialisation round-trips", "[trainstore][io]") {
  auto store = sample_store();
  auto bytes = serialize_store(store);
  auto back = deserialize_store(bytes);
  REQUIRE(back == store);
  REQUIRE(serialize_store(back) == bytes);

  for (std::size_t i = 0; i < store.size(); ++i) {
    double mass = 0.0;
    for (double m : back.instance(i).masses()) mass += m;
    REQUIRE(std::abs(mass - 1.0) <= 1e-9);
  }

  SECTION("empty store") {
    TrainingStore empty(FeatureKind::ModeDelta2D, 100, 5, {}, {});
    REQUIRE(deserialize_store(serialize_store(empty)) == empty);
  }

  SECTION("summary store") {
    std::vector<FeatureVector> inst{FeatureVector::summary({1, 2, 3, 4, 5, 6}),
                                    FeatureVector::summary({-1, 0.5, 1e300, 0, -0.0, 7})};
    TrainingStore s(FeatureKind::Summary6, 50, 11, {"only"}, inst);
    REQUIRE(deserialize_store(serialize_store(s)) == s);
  }

  SECTION("through files") {
    const auto dir = std::filesystem::temp_directory_path() / "chorus_store_test";
    std::filesystem::create_directories(dir);
    const auto a = (dir / "a.chor").string();
    const auto b = (dir / "b.chor").string();
    save_store_file(store, a);
    save_store_file(load_store_file(a), b);
    std::stringstream sa, sb;
    sa << std::ifstream(a, std::ios::binary).rdbuf();
    sb << std::ifstream(b, std::ios::binary).rdbuf();
    REQUIRE(sa.str() == sb.str());
    std::filesystem::remove_all(dir);
    REQUIRE(kind_of([&] { load_store_file(a); }) == ErrorKind::Io);
  }
}

TEST_CASE("corrupt stores are rejected", "[trainstore][io]") {
  const auto bytes = serialize_store(sample_store());

  auto magic = bytes;
  magic[0] = 'X';
  REQUIRE(kind_of([&] { deserialize_store(magic); }) == ErrorKind::BadMagic);

  auto version = bytes;
  version[4] = 2;
  REQUIRE(kind_of([&] { deserialize_store(version); }) == ErrorKind::VersionMismatch);

  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  REQUIRE(kind_of([&] { deserialize_store(flipped); }) == ErrorKind::ChecksumMismatch);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 9);
  REQUIRE(kind_of([&] { deserialize_store(truncated); }) == ErrorKind::ChecksumMismatch);

  REQUIRE(kind_of([] { deserialize_store(std::vector<std::uint8_t>{'C', 'H'}); }) == ErrorKind::BadMagic);
}

TEST_CASE("store construction checks its invariants", "[trainstore]") {
  auto inst = tagged_range(0, 4);
  REQUIRE(kind_of([&] { TrainingStore(FeatureKind::Mode1D, 100, 0, {"a", "b", "c"}, inst); }) ==
          ErrorKind::InvalidArgument);
  REQUIRE(kind_of([&] { TrainingStore(FeatureKind::Mode1D, 100, 0, {"a", "a"}, inst); }) ==
          ErrorKind::InvalidArgument);
  REQUIRE(kind_of([&] { TrainingStore(FeatureKind::MeanStd2D, 100, 0, {"a", "b"}, inst); }) ==
          ErrorKind::SpecMismatch);
  TrainingStore ok(FeatureKind::Mode1D, 100, 0, {"a", "b"}, inst);
  REQUIRE(ok.class_of(1) == 0);
  REQUIRE(ok.class_of(2) == 1);
  REQUIRE(ok.class_table() == std::vector<ClassInfo>{{"a", 2}, {"b", 2}});
}

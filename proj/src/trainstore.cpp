#include "chorus/trainstore.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "chorus/error.hpp"

namespace chorus {

namespace {

constexpr char kMagic[4] = {'C', 'H', 'O', 'R'};

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t m) {
  // std::uniform_int_distribution differs between standard libraries, so
  // draws are made by plain rejection to keep stores reproducible.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % m;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % m;
}

std::vector<std::size_t> draw(std::mt19937_64& rng, std::size_t n, std::size_t target) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < target; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(bounded(rng, n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(target);
  std::sort(pool.begin(), pool.end());
  return pool;
}

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const void* p, std::size_t n) {
    auto b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw Error(ErrorKind::MalformedHeader, "store truncated");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; stores stay far below 4 GiB.
  crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<FrameBlock> assemble_instances(std::vector<RecordingFrames> recordings,
                                           std::size_t instance_frames) {
  if (instance_frames == 0) throw Error(ErrorKind::InvalidArgument, "instance_frames must be positive");
  std::stable_sort(recordings.begin(), recordings.end(),
                   [](const auto& a, const auto& b) { return a.recording_id < b.recording_id; });
  std::size_t total = 0;
  for (const auto& r : recordings) total += r.frames.size();
  if (total < instance_frames) {
    throw Error(ErrorKind::InsufficientFrames, std::to_string(total) + " selected frames, need " +
                                                   std::to_string(instance_frames));
  }

  std::vector<FrameBlock> blocks;
  blocks.reserve(total / instance_frames);
  FrameBlock current;
  current.reserve(instance_frames);
  for (const auto& r : recordings) {
    for (const auto& ff : r.frames) {
      current.push_back(ff);
      if (current.size() == instance_frames) {
        blocks.push_back(std::move(current));
        current = FrameBlock{};
        current.reserve(instance_frames);
      }
    }
  }
  return blocks;
}

TrainingStore::TrainingStore(FeatureKind kind, std::uint32_t instance_frames, std::uint64_t seed,
                             std::vector<std::string> labels, std::vector<FeatureVector> instances)
    : kind_(kind), instance_frames_(instance_frames), seed_(seed), labels_(std::move(labels)),
      instances_(std::move(instances)) {
  if (labels_.empty()) {
    if (!instances_.empty()) throw Error(ErrorKind::InvalidArgument, "instances without classes");
    return;
  }
  if (instances_.size() % labels_.size() != 0) {
    throw Error(ErrorKind::InvalidArgument, "store is not balanced across classes");
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    for (std::size_t j = i + 1; j < labels_.size(); ++j) {
      if (labels_[i] == labels_[j]) throw Error(ErrorKind::InvalidArgument, "duplicate label " + labels_[i]);
    }
  }
  for (const auto& v : instances_) {
    if (v.kind() != kind_) throw Error(ErrorKind::SpecMismatch, "instance kind differs from store kind");
  }
  per_class_ = static_cast<std::uint32_t>(instances_.size() / labels_.size());
}

std::vector<ClassInfo> TrainingStore::class_table() const {
  std::vector<ClassInfo> table;
  table.reserve(labels_.size());
  for (const auto& label : labels_) table.push_back({label, per_class_});
  return table;
}

std::optional<std::uint32_t> TrainingStore::class_id(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return static_cast<std::uint32_t>(i);
  }
  return std::nullopt;
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t target,
                                                    std::uint64_t seed) {
  if (target > n) {
    throw Error(ErrorKind::TargetTooLarge, std::to_string(target) + " > " + std::to_string(n));
  }
  std::mt19937_64 rng(seed);
  return draw(rng, n, target);
}

TrainingStore balance_subsample(const std::map<std::string, std::vector<FeatureVector>>& per_class,
                                std::optional<std::size_t> target, std::uint64_t seed,
                                FeatureKind kind, std::uint32_t instance_frames) {
  std::size_t smallest = std::numeric_limits<std::size_t>::max();
  for (const auto& [label, blocks] : per_class) smallest = std::min(smallest, blocks.size());
  if (per_class.empty()) smallest = 0;
  const std::size_t n = target.value_or(smallest);
  if (n > smallest) {
    throw Error(ErrorKind::TargetTooLarge,
                "target " + std::to_string(n) + " exceeds smallest class (" + std::to_string(smallest) + ")");
  }

  std::mt19937_64 rng(seed);
  std::vector<std::string> labels;
  std::vector<FeatureVector> instances;
  instances.reserve(per_class.size() * n);
  for (const auto& [label, blocks] : per_class) {  // std::map iterates labels in order
    labels.push_back(label);
    for (std::size_t i : draw(rng, blocks.size(), n)) instances.push_back(blocks[i]);
  }
  return TrainingStore(kind, instance_frames, seed, std::move(labels), std::move(instances));
}

std::vector<std::uint8_t> serialize_store(const TrainingStore& store) {
  Writer w;
  w.raw(kMagic, 4);
  w.u16(kStoreVersion);
  w.u8(static_cast<std::uint8_t>(store.feature_kind()));
  if (is_histogram_kind(store.feature_kind())) {
    const auto spec = HistogramSpec::for_kind(store.feature_kind());
    w.u8(spec.axis2 ? 2 : 1);
    for (const auto* axis : {&spec.axis1, spec.axis2 ? &*spec.axis2 : nullptr}) {
      if (axis == nullptr) continue;
      w.u32(axis->bins);
      w.f64(axis->lo);
      w.f64(axis->hi);
    }
  } else {
    w.u8(0);
  }
  w.u32(store.instance_frames());
  w.u64(store.seed());
  w.u32(static_cast<std::uint32_t>(store.n_classes()));
  for (const auto& info : store.class_table()) {
    w.u32(static_cast<std::uint32_t>(info.label.size()));
    w.raw(info.label.data(), info.label.size());
    w.u32(info.n_instances);
  }
  for (const auto& v : store.instances()) {
    if (v.is_histogram()) {
      w.u32(static_cast<std::uint32_t>(v.indices().size()));
      for (std::size_t i = 0; i < v.indices().size(); ++i) {
        w.u32(v.indices()[i]);
        w.u32(v.counts()[i]);
      }
    } else {
      for (double x : v.summary_values()) w.f64(x);
    }
  }
  const std::uint32_t crc = crc_of(w.bytes());
  w.u32(crc);
  return std::move(w.bytes());
}

TrainingStore deserialize_store(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorKind::BadMagic, "not a store file");
  }
  if (bytes.size() < 6) throw Error(ErrorKind::MalformedHeader, "store truncated");
  const auto version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  if (version != kStoreVersion) {
    throw Error(ErrorKind::VersionMismatch, "store version " + std::to_string(version) +
                                                ", expected " + std::to_string(kStoreVersion));
  }
  if (bytes.size() < 10) throw Error(ErrorKind::MalformedHeader, "store truncated");
  const auto body = bytes.first(bytes.size() - 4);
  Reader tail(bytes.last(4));
  if (crc_of(body) != tail.u32()) throw Error(ErrorKind::ChecksumMismatch, "store checksum mismatch");

  Reader r(body);
  r.str(4);
  r.u16();
  const std::uint8_t kind_byte = r.u8();
  if (kind_byte > static_cast<std::uint8_t>(FeatureKind::Summary6)) {
    throw Error(ErrorKind::MalformedHeader, "unknown feature kind " + std::to_string(kind_byte));
  }
  const auto kind = static_cast<FeatureKind>(kind_byte);
  const std::uint8_t n_axes = r.u8();
  std::vector<HistogramAxis> axes;
  for (std::uint8_t a = 0; a < n_axes; ++a) {
    HistogramAxis axis;
    axis.bins = r.u32();
    axis.lo = r.f64();
    axis.hi = r.f64();
    axes.push_back(axis);
  }
  if (is_histogram_kind(kind)) {
    const auto spec = HistogramSpec::for_kind(kind);
    std::vector<HistogramAxis> expected{spec.axis1};
    if (spec.axis2) expected.push_back(*spec.axis2);
    if (axes != expected) throw Error(ErrorKind::MalformedHeader, "histogram layout does not match kind");
  } else if (!axes.empty()) {
    throw Error(ErrorKind::MalformedHeader, "summary store with histogram axes");
  }

  const std::uint32_t instance_frames = r.u32();
  const std::uint64_t seed = r.u64();
  const std::uint32_t n_classes = r.u32();
  std::vector<std::string> labels;
  std::uint64_t per_class = 0;
  for (std::uint32_t c = 0; c < n_classes; ++c) {
    const std::uint32_t len = r.u32();
    labels.push_back(r.str(len));
    const std::uint32_t count = r.u32();
    if (c > 0 && count != per_class) throw Error(ErrorKind::MalformedHeader, "unbalanced class table");
    per_class = count;
  }

  std::vector<FeatureVector> instances;
  const std::uint64_t n_instances = per_class * n_classes;
  for (std::uint64_t i = 0; i < n_instances; ++i) {
    if (is_histogram_kind(kind)) {
      const std::uint32_t nnz = r.u32();
      if (static_cast<std::uint64_t>(nnz) * 8 > r.remaining()) {
        throw Error(ErrorKind::MalformedHeader, "store truncated");
      }
      std::vector<std::uint32_t> indices(nnz);
      std::vector<std::uint32_t> counts(nnz);
      for (std::uint32_t j = 0; j < nnz; ++j) {
        indices[j] = r.u32();
        counts[j] = r.u32();
      }
      try {
        instances.push_back(FeatureVector::histogram(kind, std::move(indices), std::move(counts)));
      } catch (const Error& e) {
        throw Error(ErrorKind::MalformedHeader, e.what());
      }
    } else {
      std::array<double, 6> values{};
      for (double& x : values) x = r.f64();
      instances.push_back(FeatureVector::summary(values));
    }
  }
  if (r.remaining() != 0) throw Error(ErrorKind::MalformedHeader, "trailing bytes after payload");
  return TrainingStore(kind, instance_frames, seed, std::move(labels), std::move(instances));
}

void save_store(const TrainingStore& store, std::ostream& sink) {
  const auto bytes = serialize_store(store);
  sink.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!sink) throw Error(ErrorKind::Io, "failed writing store");
}

TrainingStore load_store(std::istream& source) {
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(source)),
                                  std::istreambuf_iterator<char>());
  return deserialize_store(bytes);
}

void save_store_file(const TrainingStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  save_store(store, out);
}

TrainingStore load_store_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  return load_store(in);
}

}  // namespace chorus

#include "chorus/knn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "chorus/error.hpp"

namespace chorus {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Sparse L1 that gives up (returns +inf) once the partial sum exceeds
// `bound`. Partial sums only grow, so an abandoned candidate is farther
// than the bound.
double l1_bounded(const FeatureVector& a, const FeatureVector& b, double bound) {
  if (!a.is_histogram()) {
    double sum = 0.0;
    const auto& x = a.summary_values();
    const auto& y = b.summary_values();
    for (std::size_t i = 0; i < x.size(); ++i) {
      sum += std::abs(x[i] - y[i]);
      if (sum > bound) return kInf;
    }
    return sum;
  }
  const auto ia = a.indices();
  const auto ib = b.indices();
  const auto ma = a.masses();
  const auto mb = b.masses();
  std::size_t i = 0;
  std::size_t j = 0;
  double sum = 0.0;
  while (i < ia.size() || j < ib.size()) {
    if (j == ib.size() || (i < ia.size() && ia[i] < ib[j])) {
      sum += ma[i++];
    } else if (i == ia.size() || ib[j] < ia[i]) {
      sum += mb[j++];
    } else {
      sum += std::abs(ma[i++] - mb[j++]);
    }
    if (sum > bound) return kInf;
  }
  return sum;
}

double kl(const FeatureVector& a, const FeatureVector& b) {
  // Both inputs share the normaliser 1 + D * eps, so the log ratio reduces
  // to ln((a + eps) / (b + eps)); bins empty in both contribute nothing.
  const double norm = 1.0 + static_cast<double>(a.dimension()) * kKlEpsilon;
  const auto ia = a.indices();
  const auto ib = b.indices();
  const auto ma = a.masses();
  const auto mb = b.masses();
  auto term = [&](double p, double q) {
    const double ps = p + kKlEpsilon;
    return ps / norm * std::log(ps / (q + kKlEpsilon));
  };
  std::size_t i = 0;
  std::size_t j = 0;
  double sum = 0.0;
  while (i < ia.size() || j < ib.size()) {
    if (j == ib.size() || (i < ia.size() && ia[i] < ib[j])) {
      sum += term(ma[i++], 0.0);
    } else if (i == ia.size() || ib[j] < ia[i]) {
      sum += term(0.0, mb[j++]);
    } else {
      sum += term(ma[i++], mb[j++]);
    }
  }
  return std::max(sum, 0.0);
}

double hellinger(const FeatureVector& a, const FeatureVector& b) {
  if (a == b) return 0.0;
  const auto ia = a.indices();
  const auto ib = b.indices();
  const auto ma = a.masses();
  const auto mb = b.masses();
  std::size_t i = 0;
  std::size_t j = 0;
  double bc = 0.0;
  while (i < ia.size() && j < ib.size()) {
    if (ia[i] < ib[j]) {
      ++i;
    } else if (ib[j] < ia[i]) {
      ++j;
    } else {
      bc += std::sqrt(ma[i++] * mb[j++]);
    }
  }
  return std::max(1.0 - bc, 0.0);
}

void check_compatible(const FeatureVector& a, const FeatureVector& b, Metric metric) {
  if (a.kind() != b.kind()) {
    throw Error(ErrorKind::SpecMismatch, std::string(feature_kind_name(a.kind())) + " vs " +
                                             std::string(feature_kind_name(b.kind())));
  }
  if (!a.is_histogram() && metric != Metric::L1) {
    throw Error(ErrorKind::SpecMismatch,
                std::string(metric_name(metric)) + " needs histogram features");
  }
}

double distance_bounded(const FeatureVector& a, const FeatureVector& b, Metric metric, double bound) {
  switch (metric) {
    case Metric::L1: return l1_bounded(a, b, bound);
    case Metric::KL: return kl(a, b);
    case Metric::Hellinger: return hellinger(a, b);
  }
  return kInf;
}

bool closer(const Neighbour& x, const Neighbour& y) {
  if (x.distance != y.distance) return x.distance < y.distance;
  if (x.class_id != y.class_id) return x.class_id < y.class_id;
  return x.instance < y.instance;
}

}  // namespace

std::string_view metric_name(Metric metric) {
  switch (metric) {
    case Metric::L1: return "l1";
    case Metric::KL: return "kl";
    case Metric::Hellinger: return "hellinger";
  }
  return "unknown";
}

Metric parse_metric(std::string_view name) {
  for (auto m : {Metric::L1, Metric::KL, Metric::Hellinger}) {
    if (metric_name(m) == name) return m;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown metric '" + std::string(name) + "'");
}

double distance(const FeatureVector& a, const FeatureVector& b, Metric metric) {
  check_compatible(a, b, metric);
  return distance_bounded(a, b, metric, kInf);
}

double Posterior::prob_of(std::uint32_t class_id) const {
  auto it = std::lower_bound(classes.begin(), classes.end(), class_id);
  if (it == classes.end() || *it != class_id) return 0.0;
  return probs[static_cast<std::size_t>(it - classes.begin())];
}

std::optional<std::size_t> Posterior::rank_of(std::uint32_t class_id) const {
  auto it = std::find(ranking.begin(), ranking.end(), class_id);
  if (it == ranking.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ranking.begin()) + 1;
}

std::vector<double> add_tie_bias(std::span<const double> probs,
                                 std::span<const std::size_t> nearest_order, std::size_t k,
                                 double m) {
  if (!(m > 1.0)) throw Error(ErrorKind::InvalidArgument, "tie bias M must exceed 1");
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "k must be positive");
  if (nearest_order.size() != probs.size()) {
    throw Error(ErrorKind::InvalidArgument, "nearest order must cover every class");
  }
  std::vector<double> biased(probs.begin(), probs.end());
  const std::size_t c = probs.size();
  if (c < 2) return biased;
  const double top = 1.0 / (static_cast<double>(k) * m);
  for (std::size_t j = 0; j < c; ++j) {
    const double step = static_cast<double>(c - 1 - j) / static_cast<double>(c - 1);
    biased[nearest_order[j]] += step * top;
  }
  return biased;
}

double entropy_of(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

Posterior classify(const FeatureVector& query, const TrainingStore& store,
                   const ClassifierConfig& cfg) {
  if (cfg.k == 0) throw Error(ErrorKind::InvalidArgument, "k must be positive");
  if (!(cfg.tie_bias_m > 1.0)) throw Error(ErrorKind::InvalidArgument, "tie bias M must exceed 1");
  if (query.kind() != store.feature_kind()) {
    throw Error(ErrorKind::SpecMismatch,
                "query is " + std::string(feature_kind_name(query.kind())) + ", store holds " +
                    std::string(feature_kind_name(store.feature_kind())));
  }
  if (!query.is_histogram() && cfg.metric != Metric::L1) {
    throw Error(ErrorKind::SpecMismatch, std::string(metric_name(cfg.metric)) + " needs histogram features");
  }

  Posterior post;
  if (cfg.candidate_classes) {
    post.classes = *cfg.candidate_classes;
    std::sort(post.classes.begin(), post.classes.end());
    post.classes.erase(std::unique(post.classes.begin(), post.classes.end()), post.classes.end());
    for (auto c : post.classes) {
      if (c >= store.n_classes()) {
        throw Error(ErrorKind::InvalidArgument, "candidate class " + std::to_string(c) + " not in store");
      }
    }
  } else {
    post.classes.resize(store.n_classes());
    std::iota(post.classes.begin(), post.classes.end(), 0u);
  }
  if (post.classes.empty()) throw Error(ErrorKind::EmptyCandidates, "no candidate classes");

  const std::size_t n_cand = post.classes.size();
  const std::size_t available = n_cand * store.per_class();
  if (cfg.k > available) {
    throw Error(ErrorKind::KTooLarge,
                "k = " + std::to_string(cfg.k) + " but only " + std::to_string(available) +
                    " candidate instances");
  }

  std::vector<Neighbour> best;  // sorted by closer(), at most k
  best.reserve(cfg.k + 1);
  std::vector<double> class_min(n_cand, kInf);
  for (std::size_t ci = 0; ci < n_cand; ++ci) {
    const std::uint32_t cls = post.classes[ci];
    const std::size_t base = static_cast<std::size_t>(cls) * store.per_class();
    for (std::size_t off = 0; off < store.per_class(); ++off) {
      const double kth = best.size() == cfg.k ? best.back().distance : kInf;
      const double bound = std::max(kth, class_min[ci]);
      const double d = distance_bounded(query, store.instance(base + off), cfg.metric, bound);
      if (d == kInf) continue;
      class_min[ci] = std::min(class_min[ci], d);
      Neighbour n{cls, base + off, d};
      if (best.size() == cfg.k && !closer(n, best.back())) continue;
      best.insert(std::upper_bound(best.begin(), best.end(), n, closer), n);
      if (best.size() > cfg.k) best.pop_back();
    }
  }
  post.neighbours = best;

  std::vector<std::size_t> votes(n_cand, 0);
  for (const auto& n : best) {
    const auto pos = std::lower_bound(post.classes.begin(), post.classes.end(), n.class_id) -
                     post.classes.begin();
    ++votes[static_cast<std::size_t>(pos)];
  }
  post.probs.resize(n_cand);
  for (std::size_t i = 0; i < n_cand; ++i) {
    post.probs[i] = static_cast<double>(votes[i]) / static_cast<double>(cfg.k);
  }

  std::vector<std::size_t> nearest(n_cand);
  std::iota(nearest.begin(), nearest.end(), std::size_t{0});
  std::stable_sort(nearest.begin(), nearest.end(),
                   [&](std::size_t a, std::size_t b) { return class_min[a] < class_min[b]; });
  post.nearest_order.reserve(n_cand);
  for (auto i : nearest) post.nearest_order.push_back(post.classes[i]);

  post.biased_scores = add_tie_bias(post.probs, nearest, cfg.k, cfg.tie_bias_m);

  std::vector<std::size_t> order(n_cand);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return post.biased_scores[a] > post.biased_scores[b];
  });
  post.ranking.reserve(n_cand);
  for (auto i : order) post.ranking.push_back(post.classes[i]);

  post.entropy = entropy_of(post.probs);
  post.normalized_entropy =
      n_cand > 1 ? std::clamp(post.entropy / std::log(static_cast<double>(n_cand)), 0.0, 1.0) : 0.0;
  return post;
}

Decision rejection_decision(const Posterior& post, double max_normalized_entropy) {
  return post.normalized_entropy > max_normalized_entropy ? Decision::Reject : Decision::Accept;
}

}  // namespace chorus

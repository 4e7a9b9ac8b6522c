#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "chorus/features.hpp"
#include "chorus/trainstore.hpp"

namespace chorus {

enum class Metric { L1, KL, Hellinger };

std::string_view metric_name(Metric metric);
Metric parse_metric(std::string_view name);

/// Additive smoothing applied to every bin before the KL divergence.
inline constexpr double kKlEpsilon = 1e-9;

/// L1: sum |a_i - b_i|. KL: KL(a || b) after smoothing and renormalising
/// both inputs. Hellinger: one minus the Bhattacharyya coefficient.
double distance(const FeatureVector& a, const FeatureVector& b, Metric metric);

struct ClassifierConfig {
  std::size_t k = 5;
  Metric metric = Metric::L1;
  double tie_bias_m = 2.0;
  std::optional<std::vector<std::uint32_t>> candidate_classes;
};

struct Neighbour {
  std::uint32_t class_id = 0;
  std::size_t instance = 0;  // index into the store
  double distance = 0.0;
  bool operator==(const Neighbour&) const = default;
};

struct Posterior {
  std::vector<std::uint32_t> classes;  // candidate class ids, ascending
  std::vector<double> probs;           // vote fractions, aligned with classes
  std::vector<double> biased_scores;   // probs plus tie bias; ranking only
  std::vector<std::uint32_t> ranking;  // class ids by biased score, best first
  std::vector<std::uint32_t> nearest_order;  // classes by closest instance
  std::vector<Neighbour> neighbours;   // the k voters, nearest first
  double entropy = 0.0;                // nats, on probs
  double normalized_entropy = 0.0;     // entropy / ln(C)

  double prob_of(std::uint32_t class_id) const;
  // 1-based position in the ranking, or nullopt when not a candidate.
  std::optional<std::size_t> rank_of(std::uint32_t class_id) const;

  bool operator==(const Posterior&) const = default;
};

/// Grid bias from 1/(k*M) for the first class of `nearest_order` down to 0
/// for the last, added to the aligned probabilities. `nearest_order` holds
/// positions into `probs`.
std::vector<double> add_tie_bias(std::span<const double> probs,
                                 std::span<const std::size_t> nearest_order, std::size_t k,
                                 double m);

double entropy_of(std::span<const double> probs);

Posterior classify(const FeatureVector& query, const TrainingStore& store,
                   const ClassifierConfig& cfg);

enum class Decision { Accept, Reject };

Decision rejection_decision(const Posterior& post, double max_normalized_entropy);

}  // namespace chorus

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chorus/knn.hpp"

namespace chorus {

struct LabeledResult {
  std::uint32_t true_class = 0;
  Posterior posterior;
};

/// One-vs-all ROC area as the Mann-Whitney statistic on the positive class
/// vote fraction: (concordant + 0.5 * tied) / (P * N).
double auc_roc_one_vs_all(std::span<const LabeledResult> results, std::uint32_t positive_class);

/// Rank-statistic AUC over raw scores; the building block of the above.
double auc_roc(std::span<const double> scores, std::span<const bool> positive);

/// Average precision. At equal scores negatives are ranked first.
double auc_pr_one_vs_all(std::span<const LabeledResult> results, std::uint32_t positive_class);
double average_precision(std::span<const double> scores, std::span<const bool> positive);

double accuracy_at_n(std::span<const LabeledResult> results, std::size_t n);
double mrr_at_n(std::span<const LabeledResult> results, std::size_t n);

struct SweepPoint {
  double raw_threshold = 0.0;
  double normalized_threshold = 0.0;
  double accepted_fraction = 0.0;
  double rejected_fraction = 0.0;
  std::optional<double> mrr_at_10;      // empty when nothing is accepted
  std::optional<double> accuracy_at_1;  // likewise
};

inline constexpr double kSweepStep = 0.1;

/// Raw-entropy thresholds 0, 0.1, ... up to the first grid point >= ln(C);
/// a result is accepted when its entropy does not exceed the threshold.
std::vector<SweepPoint> rejection_sweep(std::span<const LabeledResult> results,
                                        std::size_t n_candidates);

struct AucSummary {
  double min = 0.0;
  double max = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  double weighted_mean = 0.0;
};

AucSummary summarize(std::span<const double> values, std::span<const double> weights);

struct EvalReport {
  std::vector<std::string> labels;
  std::vector<std::size_t> n_test;
  std::vector<std::optional<double>> per_class_auc_roc;  // empty for degenerate classes
  std::vector<std::optional<double>> per_class_auc_pr;
  std::optional<AucSummary> auc_roc_summary;
  std::optional<AucSummary> auc_pr_summary;
  std::map<std::size_t, double> accuracy_at;
  std::map<std::size_t, double> mrr_at;
  std::vector<SweepPoint> rejection_curve;
  double accuracy = 0.0;
  std::vector<std::string> warnings;
};

EvalReport evaluate(std::span<const LabeledResult> results, const std::vector<std::string>& labels,
                    std::span<const std::size_t> n_list, std::size_t n_candidates);

std::string per_class_csv(const EvalReport& report);
std::string sweep_csv(const EvalReport& report);
std::string at_n_csv(const EvalReport& report);
std::string report_json(const EvalReport& report);

}  // namespace chorus

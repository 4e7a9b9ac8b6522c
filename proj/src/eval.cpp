#include "chorus/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <memory>
#include <numeric>
#include <nlohmann/json.hpp>

#include "chorus/error.hpp"
#include "chorus/stats.hpp"

namespace chorus {

namespace {

std::string num(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

struct OneVsAll {
  std::vector<double> scores;
  std::unique_ptr<bool[]> positive;
  std::span<const bool> labels() const { return {positive.get(), scores.size()}; }
};

OneVsAll split(std::span<const LabeledResult> results, std::uint32_t positive_class) {
  OneVsAll out;
  out.scores.reserve(results.size());
  out.positive = std::make_unique<bool[]>(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    out.scores.push_back(results[i].posterior.prob_of(positive_class));
    out.positive[i] = results[i].true_class == positive_class;
  }
  return out;
}

}  // namespace

double auc_roc(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size()) throw Error(ErrorKind::InvalidArgument, "length mismatch");
  const std::size_t n = scores.size();
  const auto n_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw Error(ErrorKind::DegenerateClass, "need at least one positive and one negative");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Tied scores share the mean of their 1-based ranks.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    std::size_t pos_in_group = 0;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      pos_in_group += positive[order[j]] ? 1 : 0;
      ++j;
    }
    const double mean_rank = 0.5 * static_cast<double>(i + 1 + j);
    rank_sum += mean_rank * static_cast<double>(pos_in_group);
    i = j;
  }
  const double p = static_cast<double>(n_pos);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(n_neg));
}

double average_precision(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size()) throw Error(ErrorKind::InvalidArgument, "length mismatch");
  const auto n_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
  if (n_pos == 0) throw Error(ErrorKind::DegenerateClass, "no positive instances");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    if (positive[a] != positive[b]) return !positive[a];
    return a < b;
  });

  double ap = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (!positive[order[r]]) continue;
    ++hits;
    ap += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  return ap / static_cast<double>(n_pos);
}

double auc_roc_one_vs_all(std::span<const LabeledResult> results, std::uint32_t positive_class) {
  const auto ova = split(results, positive_class);
  return auc_roc(ova.scores, ova.labels());
}

double auc_pr_one_vs_all(std::span<const LabeledResult> results, std::uint32_t positive_class) {
  const auto ova = split(results, positive_class);
  return average_precision(ova.scores, ova.labels());
}

double accuracy_at_n(std::span<const LabeledResult> results, std::size_t n) {
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "N must be at least 1");
  if (results.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& r : results) {
    auto rank = r.posterior.rank_of(r.true_class);
    if (rank && *rank <= n) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

double mrr_at_n(std::span<const LabeledResult> results, std::size_t n) {
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "N must be at least 1");
  if (results.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : results) {
    auto rank = r.posterior.rank_of(r.true_class);
    if (rank && *rank <= n) sum += 1.0 / static_cast<double>(*rank);
  }
  return sum / static_cast<double>(results.size());
}

std::vector<SweepPoint> rejection_sweep(std::span<const LabeledResult> results,
                                        std::size_t n_candidates) {
  if (results.empty()) throw Error(ErrorKind::EmptyInput, "no results to sweep");
  const double max_entropy = n_candidates > 1 ? std::log(static_cast<double>(n_candidates)) : 0.0;
  const auto steps = static_cast<std::size_t>(std::floor(max_entropy / kSweepStep)) + 2;

  std::vector<SweepPoint> curve;
  curve.reserve(steps);
  std::vector<LabeledResult> accepted;
  for (std::size_t i = 0; i < steps; ++i) {
    SweepPoint pt;
    pt.raw_threshold = static_cast<double>(i) / 10.0;
    pt.normalized_threshold = max_entropy > 0.0 ? pt.raw_threshold / max_entropy : 0.0;
    accepted.clear();
    for (const auto& r : results) {
      if (r.posterior.entropy <= pt.raw_threshold) accepted.push_back(r);
    }
    pt.accepted_fraction = static_cast<double>(accepted.size()) / static_cast<double>(results.size());
    pt.rejected_fraction = 1.0 - pt.accepted_fraction;
    if (!accepted.empty()) {
      pt.mrr_at_10 = mrr_at_n(accepted, 10);
      pt.accuracy_at_1 = accuracy_at_n(accepted, 1);
    }
    curve.push_back(pt);
  }
  return curve;
}

AucSummary summarize(std::span<const double> values, std::span<const double> weights) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "nothing to summarise");
  if (weights.size() != values.size()) throw Error(ErrorKind::InvalidArgument, "weights length mismatch");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());

  AucSummary s;
  s.min = sorted.front();
  s.max = sorted.back();
  s.median = quantile_sorted(sorted, 0.5);
  s.q1 = quantile_sorted(sorted, 0.25);
  s.q3 = quantile_sorted(sorted, 0.75);
  s.iqr = s.q3 - s.q1;

  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (wsum > 0.0) {
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) acc += weights[i] * values[i];
    s.weighted_mean = acc / wsum;
  } else {
    s.weighted_mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  }
  return s;
}

EvalReport evaluate(std::span<const LabeledResult> results, const std::vector<std::string>& labels,
                    std::span<const std::size_t> n_list, std::size_t n_candidates) {
  EvalReport report;
  report.labels = labels;
  std::vector<double> roc_values;
  std::vector<double> pr_values;
  std::vector<double> roc_weights;
  std::vector<double> pr_weights;
  for (std::uint32_t c = 0; c < labels.size(); ++c) {
    const auto count = static_cast<std::size_t>(std::count_if(
        results.begin(), results.end(), [c](const LabeledResult& r) { return r.true_class == c; }));
    report.n_test.push_back(count);
    std::optional<double> roc;
    std::optional<double> pr;
    try {
      roc = auc_roc_one_vs_all(results, c);
      roc_values.push_back(*roc);
      roc_weights.push_back(static_cast<double>(count));
    } catch (const Error& e) {
      report.warnings.push_back(labels[c] + ": ROC " + e.what());
    }
    try {
      pr = auc_pr_one_vs_all(results, c);
      pr_values.push_back(*pr);
      pr_weights.push_back(static_cast<double>(count));
    } catch (const Error& e) {
      report.warnings.push_back(labels[c] + ": PR " + e.what());
    }
    report.per_class_auc_roc.push_back(roc);
    report.per_class_auc_pr.push_back(pr);
  }
  if (!roc_values.empty()) report.auc_roc_summary = summarize(roc_values, roc_weights);
  if (!pr_values.empty()) report.auc_pr_summary = summarize(pr_values, pr_weights);
  for (auto n : n_list) {
    report.accuracy_at[n] = accuracy_at_n(results, n);
    report.mrr_at[n] = mrr_at_n(results, n);
  }
  if (!results.empty()) {
    report.rejection_curve = rejection_sweep(results, n_candidates);
    report.accuracy = accuracy_at_n(results, 1);
  }
  return report;
}

std::string per_class_csv(const EvalReport& report) {
  std::string out = "species,n_test,auc_roc,auc_pr\n";
  for (std::size_t c = 0; c < report.labels.size(); ++c) {
    out += report.labels[c] + "," + std::to_string(report.n_test[c]) + "," +
           opt_num(report.per_class_auc_roc[c]) + "," + opt_num(report.per_class_auc_pr[c]) + "\n";
  }
  return out;
}

std::string sweep_csv(const EvalReport& report) {
  std::string out = "raw_threshold,normalized_threshold,accepted_fraction,mrr_at_10,accuracy_at_1\n";
  for (const auto& pt : report.rejection_curve) {
    out += num(pt.raw_threshold) + "," + num(pt.normalized_threshold) + "," +
           num(pt.accepted_fraction) + "," + opt_num(pt.mrr_at_10) + "," + opt_num(pt.accuracy_at_1) + "\n";
  }
  return out;
}

std::string at_n_csv(const EvalReport& report) {
  std::string out = "n,accuracy_at_n,mrr_at_n\n";
  for (const auto& [n, acc] : report.accuracy_at) {
    out += std::to_string(n) + "," + num(acc) + "," + num(report.mrr_at.at(n)) + "\n";
  }
  return out;
}

std::string report_json(const EvalReport& report) {
  using json = nlohmann::ordered_json;
  auto summary_json = [](const std::optional<AucSummary>& s) -> json {
    if (!s) return nullptr;
    return json{{"min", s->min},       {"max", s->max}, {"median", s->median},
                {"q1", s->q1},         {"q3", s->q3},   {"iqr", s->iqr},
                {"weighted_mean", s->weighted_mean}};
  };
  json classes = json::array();
  for (std::size_t c = 0; c < report.labels.size(); ++c) {
    classes.push_back({{"species", report.labels[c]},
                       {"n_test", report.n_test[c]},
                       {"auc_roc", opt_json(report.per_class_auc_roc[c])},
                       {"auc_pr", opt_json(report.per_class_auc_pr[c])}});
  }
  json acc = json::object();
  for (const auto& [n, v] : report.accuracy_at) acc[std::to_string(n)] = v;
  json mrr = json::object();
  for (const auto& [n, v] : report.mrr_at) mrr[std::to_string(n)] = v;
  json curve = json::array();
  for (const auto& pt : report.rejection_curve) {
    curve.push_back({{"raw_threshold", pt.raw_threshold},
                     {"normalized_threshold", pt.normalized_threshold},
                     {"accepted_fraction", pt.accepted_fraction},
                     {"rejected_fraction", pt.rejected_fraction},
                     {"mrr_at_10", opt_json(pt.mrr_at_10)},
                     {"accuracy_at_1", opt_json(pt.accuracy_at_1)}});
  }
  json doc = {{"classes", classes},
              {"auc_roc_summary", summary_json(report.auc_roc_summary)},
              {"auc_pr_summary", summary_json(report.auc_pr_summary)},
              {"accuracy", report.accuracy},
              {"accuracy_at", acc},
              {"mrr_at", mrr},
              {"rejection_curve", curve},
              {"warnings", report.warnings}};
  return doc.dump(2) + "\n";
}

}  // namespace chorus

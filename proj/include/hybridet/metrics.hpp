#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace hybridet {

struct LabeledScore {
  std::string id;
  double score = 0.0;  // in [0, 1]
  bool is_hybrid = false;
  std::string species_group;
};

// Mann-Whitney AUC with 0.5 credit for ties: the probability that a random
// positive outranks a random negative. Exact (rank-based), so it matches a
// brute-force pair count bit for bit.
double roc_auc(std::span<const double> positives, std::span<const double> negatives);
double roc_auc(const std::vector<LabeledScore>& scores);  // hybrid = positive

// Fraction of hybrid samples with score >= threshold.
double recall_at(const std::vector<LabeledScore>& scores, double threshold);

struct GroupMetrics {
  std::string group;
  int n_samples = 0;
  std::optional<double> auc_hybrid;     // hybrid positive, score as-is
  std::optional<double> auc_nonhybrid;  // configurable orientation, see ReportConfig
  std::optional<double> recall;
};

struct ReportConfig {
  double recall_threshold = 0.5;
  // Aggregate = weighted mean over "<group>/<metric>" keys with metric in
  // {auc_hybrid, auc_nonhybrid, recall}. Empty map: unweighted mean of every
  // defined metric value.
  std::map<std::string, double> aggregate_weights;
  // The secondary AUC column has no canonical definition; by default it
  // scores non-hybrids as positives against the inverted score.
  bool alt_positive_nonhybrid = true;
  bool alt_invert_score = true;
};

struct EvalReport {
  std::vector<GroupMetrics> groups;
  std::optional<double> aggregate_score;
  nlohmann::json metadata;  // run flags (threshold, jitter, ablations, ...)
};

// Per-species-group AUC/recall table. Groups appear in first-seen order.
// Metrics that are undefined for a group (e.g. hybrid AUC with no hybrids)
// are left unset and rendered as "undef".
EvalReport build_report(const std::vector<LabeledScore>& scores, const ReportConfig& cfg);

std::string render_table(const EvalReport& report);
nlohmann::json report_to_json(const EvalReport& report);

// (FPR, TPR) points of the ROC curve, for external plotting.
std::vector<std::pair<double, double>> roc_points(const std::vector<LabeledScore>& scores);

}  // namespace hybridet

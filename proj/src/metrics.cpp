#include "hybridet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hybridet/error.hpp"

namespace hybridet {

double roc_auc(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty())
    throw ConfigError("AUC undefined: needs at least one positive and one negative");
  const std::size_t n_pos = positives.size();
  const std::size_t n_neg = negatives.size();
  const std::size_t n = n_pos + n_neg;

  std::vector<std::pair<double, bool>> all;
  all.reserve(n);
  for (double s : positives) all.emplace_back(s, true);
  for (double s : negatives) all.emplace_back(s, false);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  // Sum of positive ranks with average ranks over ties. Ranks are integers
  // or half-integers, so the sum is exact in double.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && all[j].first == all[i].first) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t t = i; t < j; ++t)
      if (all[t].second) rank_sum_pos += avg_rank;
    i = j;
  }
  const double n_pos_d = static_cast<double>(n_pos);
  const double n_neg_d = static_cast<double>(n_neg);
  return (rank_sum_pos - n_pos_d * (n_pos_d + 1.0) * 0.5) / (n_pos_d * n_neg_d);
}

double roc_auc(const std::vector<LabeledScore>& scores) {
  std::vector<double> pos, neg;
  for (const auto& s : scores) (s.is_hybrid ? pos : neg).push_back(s.score);
  return roc_auc(pos, neg);
}

double recall_at(const std::vector<LabeledScore>& scores, double threshold) {
  std::size_t n_pos = 0, hit = 0;
  for (const auto& s : scores) {
    if (!s.is_hybrid) continue;
    ++n_pos;
    if (s.score >= threshold) ++hit;
  }
  if (n_pos == 0) throw ConfigError("recall undefined: no hybrid samples");
  return static_cast<double>(hit) / static_cast<double>(n_pos);
}

EvalReport build_report(const std::vector<LabeledScore>& scores, const ReportConfig& cfg) {
  if (scores.empty()) throw ConfigError("cannot build a report from zero scores");

  std::vector<std::string> group_order;
  for (const auto& s : scores)
    if (std::find(group_order.begin(), group_order.end(), s.species_group) ==
        group_order.end())
      group_order.push_back(s.species_group);

  EvalReport report;
  for (const auto& group : group_order) {
    std::vector<LabeledScore> subset;
    for (const auto& s : scores)
      if (s.species_group == group) subset.push_back(s);

    GroupMetrics gm;
    gm.group = group;
    gm.n_samples = static_cast<int>(subset.size());
    std::size_t n_hyb = 0;
    for (const auto& s : subset) n_hyb += s.is_hybrid ? 1 : 0;
    const bool both = n_hyb > 0 && n_hyb < subset.size();
    if (both) {
      gm.auc_hybrid = roc_auc(subset);
      std::vector<double> alt_pos, alt_neg;
      for (const auto& s : subset) {
        const double v = cfg.alt_invert_score ? 1.0 - s.score : s.score;
        const bool positive = cfg.alt_positive_nonhybrid ? !s.is_hybrid : s.is_hybrid;
        (positive ? alt_pos : alt_neg).push_back(v);
      }
      gm.auc_nonhybrid = roc_auc(alt_pos, alt_neg);
    }
    if (n_hyb > 0) gm.recall = recall_at(subset, cfg.recall_threshold);
    report.groups.push_back(std::move(gm));
  }

  // Aggregate: weighted mean of configured columns, or the unweighted mean
  // of everything defined when no weights are given.
  auto lookup = [&](const std::string& group,
                    const std::string& metric) -> std::optional<double> {
    for (const auto& g : report.groups) {
      if (g.group != group) continue;
      if (metric == "auc_hybrid") return g.auc_hybrid;
      if (metric == "auc_nonhybrid") return g.auc_nonhybrid;
      if (metric == "recall") return g.recall;
      throw ConfigError("unknown aggregate metric '" + metric + "'");
    }
    return std::nullopt;
  };
  double acc = 0.0, wsum = 0.0;
  if (cfg.aggregate_weights.empty()) {
    for (const auto& g : report.groups)
      for (const auto& v : {g.auc_hybrid, g.auc_nonhybrid, g.recall})
        if (v) {
          acc += *v;
          wsum += 1.0;
        }
  } else {
    for (const auto& [key, w] : cfg.aggregate_weights) {
      const auto slash = key.find('/');
      if (slash == std::string::npos)
        throw ConfigError("aggregate weight key must be '<group>/<metric>': " + key);
      const auto v = lookup(key.substr(0, slash), key.substr(slash + 1));
      if (v) {
        acc += w * *v;
        wsum += w;
      }
    }
  }
  if (wsum > 0.0) report.aggregate_score = acc / wsum;

  report.metadata["recall_threshold"] = cfg.recall_threshold;
  return report;
}

std::string render_table(const EvalReport& report) {
  std::ostringstream out;
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("undef");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", *v);
    return std::string(buf);
  };
  out << "group      n      AUC_H   AUC_N   recall\n";
  for (const auto& g : report.groups) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-9s %-6d %-7s %-7s %-7s\n", g.group.c_str(),
                  g.n_samples, cell(g.auc_hybrid).c_str(), cell(g.auc_nonhybrid).c_str(),
                  cell(g.recall).c_str());
    out << line;
  }
  out << "score: " << cell(report.aggregate_score) << "\n";
  return out.str();
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["groups"] = nlohmann::json::array();
  for (const auto& g : report.groups) {
    nlohmann::json gj;
    gj["group"] = g.group;
    gj["n_samples"] = g.n_samples;
    gj["auc_hybrid"] = g.auc_hybrid ? nlohmann::json(*g.auc_hybrid) : nlohmann::json();
    gj["auc_nonhybrid"] =
        g.auc_nonhybrid ? nlohmann::json(*g.auc_nonhybrid) : nlohmann::json();
    gj["recall"] = g.recall ? nlohmann::json(*g.recall) : nlohmann::json();
    j["groups"].push_back(gj);
  }
  j["aggregate_score"] =
      report.aggregate_score ? nlohmann::json(*report.aggregate_score) : nlohmann::json();
  j["metadata"] = report.metadata;
  return j;
}

std::vector<std::pair<double, double>> roc_points(const std::vector<LabeledScore>& scores) {
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& s : scores) (s.is_hybrid ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0)
    throw ConfigError("ROC undefined: needs both classes");

  std::vector<LabeledScore> sorted = scores;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.score > b.score; });
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].score == sorted[i].score) {
      (sorted[j].is_hybrid ? tp : fp)++;
      ++j;
    }
    pts.emplace_back(static_cast<double>(fp) / static_cast<double>(n_neg),
                     static_cast<double>(tp) / static_cast<double>(n_pos));
    i = j;
  }
  return pts;
}

}  // namespace hybridet

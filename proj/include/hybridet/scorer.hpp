#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hybridet/embedding.hpp"
#include "hybridet/mlp.hpp"

namespace hybridet {

struct ScorerConfig {
  double threshold = 0.75;  // t in the probability filter

  void validate() const;
};

struct Top2 {
  double p1 = 0.0;
  double p2 = 0.0;
  int idx1 = -1;
  int idx2 = -1;
};

// Two highest probabilities; ties resolved toward the lower class index.
Top2 top2(std::span<const double> probs);

// Probability filtering: confident top-1 means non-hybrid (score 1 - p1),
// otherwise the mass is split between two classes (score p1 + p2). The
// boundary p1 == t takes the hybrid branch; the non-hybrid condition is
// strictly p1 > t.
double anomaly_score(std::span<const double> probs, const ScorerConfig& cfg);

// Forward + anomaly_score per embedding row, order preserved.
std::vector<std::pair<std::string, double>> score_batch(
    const MlpParams& params, const EmbeddingMatrix& embeddings,
    const std::vector<std::string>& ids, const ScorerConfig& cfg);

// Linear SVM baseline (hybrid = positive class) with a logistic squashing
// into [0, 1]. The calibration scale maps the 5%/95% margin quantiles of the
// training data near scores 0.05/0.95.
struct SvmModel {
  std::vector<double> weight;
  double bias = 0.0;
  double scale = 1.0;
};

// Pegasos-style stochastic subgradient descent on the hinge loss with L2
// regularization lambda. Deterministic per seed. binary_labels: 1 = hybrid.
SvmModel svm_train(const EmbeddingMatrix& embeddings,
                   const std::vector<int>& binary_labels, int epochs, double lambda,
                   std::uint64_t seed);

double svm_margin(const SvmModel& model, std::span<const float> x);
double svm_score(const SvmModel& model, std::span<const float> x);

}  // namespace hybridet

#include "hybridet/scorer.hpp"

#include <algorithm>
#include <cmath>

#include "hybridet/error.hpp"
#include "hybridet/rng.hpp"

namespace hybridet {

void ScorerConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ConfigError("scorer threshold must be in (0, 1)");
}

Top2 top2(std::span<const double> probs) {
  if (probs.size() < 2) throw ConfigError("top2 requires at least 2 classes");
  Top2 t;
  t.idx1 = 0;
  for (std::size_t i = 1; i < probs.size(); ++i)
    if (probs[i] > probs[t.idx1]) t.idx1 = static_cast<int>(i);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (static_cast<int>(i) == t.idx1) continue;
    if (t.idx2 < 0 || probs[i] > probs[t.idx2]) t.idx2 = static_cast<int>(i);
  }
  t.p1 = probs[static_cast<std::size_t>(t.idx1)];
  t.p2 = probs[static_cast<std::size_t>(t.idx2)];
  return t;
}

double anomaly_score(std::span<const double> probs, const ScorerConfig& cfg) {
  cfg.validate();
  const Top2 t = top2(probs);
  return t.p1 > cfg.threshold ? 1.0 - t.p1 : t.p1 + t.p2;
}

std::vector<std::pair<std::string, double>> score_batch(
    const MlpParams& params, const EmbeddingMatrix& embeddings,
    const std::vector<std::string>& ids, const ScorerConfig& cfg) {
  cfg.validate();
  if (embeddings.n != ids.size())
    throw ConfigError("id count does not match embedding row count");
  if (embeddings.n == 0) return {};
  if (static_cast<int>(embeddings.d) != params.in_dim())
    throw ConfigError("embedding dimension does not match model input");

  kernels::Mat x(static_cast<int>(embeddings.n), static_cast<int>(embeddings.d));
  for (std::size_t i = 0; i < embeddings.data.size(); ++i)
    x.v[i] = embeddings.data[i];
  ForwardCache cache;
  forward_batch(params, x, cache);

  std::vector<std::pair<std::string, double>> out;
  out.reserve(ids.size());
  for (std::uint32_t r = 0; r < embeddings.n; ++r) {
    const std::span<const double> probs(cache.probs.row(static_cast<int>(r)),
                                        static_cast<std::size_t>(params.k()));
    out.emplace_back(ids[r], anomaly_score(probs, cfg));
  }
  return out;
}

SvmModel svm_train(const EmbeddingMatrix& embeddings,
                   const std::vector<int>& binary_labels, int epochs, double lambda,
                   std::uint64_t seed) {
  if (embeddings.n == 0) throw ConfigError("svm: empty training set");
  if (binary_labels.size() != embeddings.n)
    throw ConfigError("svm: label count does not match embedding rows");
  if (epochs < 1) throw ConfigError("svm: epochs must be positive");
  if (!(lambda > 0.0)) throw ConfigError("svm: lambda must be positive");
  const std::size_t n = embeddings.n;
  const std::size_t d = embeddings.d;
  bool has_pos = false, has_neg = false;
  for (int l : binary_labels) (l ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg)
    throw ConfigError("svm: training data must contain both classes");

  SvmModel model;
  model.weight.assign(d, 0.0);
  Rng rng(seed);
  const std::uint64_t steps = static_cast<std::uint64_t>(epochs) * n;
  for (std::uint64_t t = 1; t <= steps; ++t) {
    const std::size_t i = rng.uniform_below(n);
    const double y = binary_labels[i] ? 1.0 : -1.0;
    const auto x = embeddings.row(i);
    double margin = model.bias;
    for (std::size_t j = 0; j < d; ++j) margin += model.weight[j] * x[j];
    const double eta = 1.0 / (lambda * static_cast<double>(t));
    const double shrink = 1.0 - eta * lambda;
    for (std::size_t j = 0; j < d; ++j) model.weight[j] *= shrink;
    if (y * margin < 1.0) {
      for (std::size_t j = 0; j < d; ++j) model.weight[j] += eta * y * x[j];
      model.bias += eta * y;  // bias is not regularized
    }
  }

  // Calibration: fit the logistic temperature so the 5th/95th percentile
  // margins of the training data land near scores 0.05/0.95.
  std::vector<double> margins(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = embeddings.row(i);
    double m = model.bias;
    for (std::size_t j = 0; j < d; ++j) m += model.weight[j] * x[j];
    margins[i] = m;
  }
  std::sort(margins.begin(), margins.end());
  const auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    return margins[lo] * (1.0 - frac) + margins[hi] * frac;
  };
  const double spread = quantile(0.95) - quantile(0.05);
  const double logit95 = std::log(19.0);  // logistic(log 19) = 0.95
  model.scale = spread > 1e-12 ? spread / (2.0 * logit95) : 1.0;
  return model;
}

double svm_margin(const SvmModel& model, std::span<const float> x) {
  if (x.size() != model.weight.size())
    throw ConfigError("svm: input dimension mismatch");
  double m = model.bias;
  for (std::size_t j = 0; j < x.size(); ++j) m += model.weight[j] * x[j];
  return m;
}

double svm_score(const SvmModel& model, std::span<const float> x) {
  const double m = svm_margin(model, x);
  return 1.0 / (1.0 + std::exp(-m / model.scale));
}

}  // namespace hybridet

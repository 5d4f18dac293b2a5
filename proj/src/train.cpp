#include "hybridet/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "hybridet/error.hpp"
#include "hybridet/metrics.hpp"
#include "hybridet/scorer.hpp"

namespace hybridet {

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
  if (!(lr_head > 0.0)) throw ConfigError("train: lr_head must be positive");
  if (!(lr_adapter >= 0.0)) throw ConfigError("train: lr_adapter must be >= 0");
  if (lr_adapter > lr_head)
    throw ConfigError("train: lr_adapter must not exceed lr_head");
  if (h1 < 1 || h2 < 1) throw ConfigError("train: hidden widths must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
  if (momentum < 0.0 || momentum > 0.99)
    throw ConfigError("train: momentum must be in [0, 0.99]");
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw ConfigError("train: val_fraction must be in (0, 1)");
  if (!(score_threshold > 0.0 && score_threshold < 1.0))
    throw ConfigError("train: score_threshold must be in (0, 1)");
}

WeightedSampler::WeightedSampler(const std::vector<HybridLabel>& labels) {
  if (labels.empty()) throw ConfigError("sampler: no samples");
  std::size_t n_hyb = 0;
  for (const auto& l : labels) {
    if (!l.is_labeled()) throw ConfigError("sampler: unlabeled sample");
    n_hyb += l.is_hybrid() ? 1 : 0;
  }
  const std::size_t n_non = labels.size() - n_hyb;
  if (n_hyb == 0 || n_non == 0)
    throw ConfigError("sampler: needs both hybrid and non-hybrid samples");

  cumulative_.reserve(labels.size());
  double acc = 0.0;
  for (const auto& l : labels) {
    acc += l.is_hybrid() ? 1.0 / static_cast<double>(n_hyb)
                         : 1.0 / static_cast<double>(n_non);
    cumulative_.push_back(acc);
  }
}

std::size_t WeightedSampler::next(Rng& rng) const {
  const double u = rng.uniform() * cumulative_.back();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  return std::min(static_cast<std::size_t>(it - cumulative_.begin()),
                  cumulative_.size() - 1);
}

std::vector<std::size_t> WeightedSampler::draw(std::size_t n, Rng& rng) const {
  std::vector<std::size_t> out(n);
  for (auto& v : out) v = next(rng);
  return out;
}

std::vector<std::size_t> weighted_sample_indices(const std::vector<HybridLabel>& labels,
                                                 std::size_t n_draws, Rng& rng) {
  return WeightedSampler(labels).draw(n_draws, rng);
}

namespace {

// Accuracy on the val split: a non-hybrid is correct when its class wins,
// a hybrid when its parents are the two strongest classes.
bool prediction_correct(std::span<const double> probs, const HybridLabel& label) {
  const Top2 t = top2(probs);
  if (!label.is_hybrid()) return t.idx1 == label.class_a;
  const int lo = std::min(t.idx1, t.idx2);
  const int hi = std::max(t.idx1, t.idx2);
  return lo == label.class_a && hi == label.class_b;
}

}  // namespace

TrainResult train(const std::vector<SampleRecord>& records,
                  const EmbeddingMatrix& embeddings, const Taxonomy& taxonomy,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (records.size() != embeddings.n)
    throw ConfigError("train: manifest rows (" + std::to_string(records.size()) +
                      ") do not match embedding rows (" + std::to_string(embeddings.n) + ")");
  for (const auto& r : records)
    if (!r.label.is_labeled())
      throw ConfigError("unlabeled sample in training set: " + r.id);

  const int d = static_cast<int>(embeddings.d);
  const int k = taxonomy.k();

  DatasetSplit split =
      stratified_split(records, cfg.val_fraction, derive_seed(cfg.seed, "split"));
  const auto train_rows = rows_of(split.train, records);
  const auto val_rows = rows_of(split.val, records);

  MlpParams params = MlpParams::init(d, cfg.h1, cfg.h2, k, cfg.with_adapter,
                                     derive_seed(cfg.seed, "init"));

  std::vector<SoftTarget> targets;
  targets.reserve(records.size());
  for (const auto& r : records) targets.push_back(build_soft_target(r.label, taxonomy));

  std::vector<HybridLabel> train_labels;
  train_labels.reserve(train_rows.size());
  for (auto row : train_rows) train_labels.push_back(records[row].label);
  const WeightedSampler sampler(train_labels);
  Rng sampler_rng(derive_seed(cfg.seed, "sampler"));

  const std::size_t steps_per_epoch =
      (train_rows.size() + static_cast<std::size_t>(cfg.batch_size) - 1) /
      static_cast<std::size_t>(cfg.batch_size);

  SgdConfig sgd{cfg.lr_head, cfg.lr_adapter, cfg.weight_decay, cfg.momentum};
  SgdState sgd_state;
  MlpGradients grads = MlpGradients::zeros_like(params);
  ForwardCache cache;
  kernels::Mat batch_x(cfg.batch_size, d);
  std::vector<SoftTarget> batch_t(static_cast<std::size_t>(cfg.batch_size));

  // Val inputs, promoted once.
  kernels::Mat val_x(static_cast<int>(val_rows.size()), d);
  for (std::size_t i = 0; i < val_rows.size(); ++i) {
    const auto row = embeddings.row(val_rows[i]);
    for (int j = 0; j < d; ++j) val_x(static_cast<int>(i), j) = row[static_cast<std::size_t>(j)];
  }
  bool val_has_both = false;
  {
    bool hyb = false, non = false;
    for (auto r : val_rows) (records[r].label.is_hybrid() ? hyb : non) = true;
    val_has_both = hyb && non;
  }
  const ScorerConfig val_scorer{cfg.score_threshold};

  TrainResult result{params, {}, split};
  double best_auc = -1.0;
  ForwardCache val_cache;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_acc = 0.0;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      const auto picks = sampler.draw(static_cast<std::size_t>(cfg.batch_size), sampler_rng);
      for (int b = 0; b < cfg.batch_size; ++b) {
        const std::size_t row = train_rows[picks[static_cast<std::size_t>(b)]];
        const auto src = embeddings.row(row);
        for (int j = 0; j < d; ++j) batch_x(b, j) = src[static_cast<std::size_t>(j)];
        batch_t[static_cast<std::size_t>(b)] = targets[row];
      }
      const double loss = backward(params, batch_x, batch_t, grads, cache);
      if (!std::isfinite(loss))
        throw Error("non-finite training loss at epoch " + std::to_string(epoch) +
                    ", step " + std::to_string(step));
      sgd_step(params, grads, sgd, sgd_state);
      loss_acc += loss;
    }

    EpochStats stats;
    stats.mean_loss = loss_acc / static_cast<double>(steps_per_epoch);

    forward_batch(params, val_x, val_cache);
    std::size_t correct = 0;
    std::vector<LabeledScore> val_scores;
    val_scores.reserve(val_rows.size());
    for (std::size_t i = 0; i < val_rows.size(); ++i) {
      const std::span<const double> probs(val_cache.probs.row(static_cast<int>(i)),
                                          static_cast<std::size_t>(k));
      const auto& rec = records[val_rows[i]];
      correct += prediction_correct(probs, rec.label) ? 1 : 0;
      val_scores.push_back(
          {rec.id, anomaly_score(probs, val_scorer), rec.label.is_hybrid(), rec.species_group});
    }
    stats.val_accuracy =
        val_rows.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(val_rows.size());
    stats.val_hybrid_auc =
        val_has_both ? roc_auc(val_scores) : std::numeric_limits<double>::quiet_NaN();
    result.history.epochs.push_back(stats);

    if (val_has_both && stats.val_hybrid_auc > best_auc) {
      best_auc = stats.val_hybrid_auc;
      result.history.best_epoch = epoch;
      if (!cfg.keep_last) result.params = params;
    }
  }

  if (cfg.keep_last || result.history.best_epoch < 0) result.params = params;
  return result;
}

}  // namespace hybridet

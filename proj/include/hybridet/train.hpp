#pragma once

#include <cstdint>
#include <vector>

#include "hybridet/data.hpp"
#include "hybridet/embedding.hpp"
#include "hybridet/mlp.hpp"
#include "hybridet/rng.hpp"

namespace hybridet {

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  double lr_head = 3e-4;
  double lr_adapter = 3e-6;
  int h1 = 256;
  int h2 = 256;
  std::uint64_t seed = 0;
  double weight_decay = 0.0;
  double momentum = 0.0;
  double val_fraction = 0.2;
  double score_threshold = 0.75;  // used for the per-epoch val hybrid-AUC
  bool with_adapter = true;
  bool keep_last = false;  // true: return the final epoch instead of the best val AUC

  void validate() const;
};

struct EpochStats {
  double mean_loss = 0.0;
  double val_hybrid_auc = 0.0;  // NaN when the val split lacks a class
  double val_accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;  // -1 until a val AUC is defined
};

// Sampling with replacement, each sample weighted by the inverse size of its
// hybrid-status group, so half the draws are hybrids in expectation.
class WeightedSampler {
 public:
  explicit WeightedSampler(const std::vector<HybridLabel>& labels);

  std::size_t next(Rng& rng) const;
  std::vector<std::size_t> draw(std::size_t n, Rng& rng) const;

 private:
  std::vector<double> cumulative_;
};

std::vector<std::size_t> weighted_sample_indices(const std::vector<HybridLabel>& labels,
                                                 std::size_t n_draws, Rng& rng);

struct TrainResult {
  MlpParams params;
  TrainHistory history;
  DatasetSplit split;
};

// Full training run: stratified split, weighted sampling, ceil(n/batch)
// steps per epoch, per-epoch validation, best-checkpoint selection.
// Deterministic per cfg.seed.
TrainResult train(const std::vector<SampleRecord>& records,
                  const EmbeddingMatrix& embeddings, const Taxonomy& taxonomy,
                  const TrainConfig& cfg);

}  // namespace hybridet

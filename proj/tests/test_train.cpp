#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hybridet/error.hpp"
#include "hybridet/train.hpp"

using namespace hybridet;

namespace {

std::vector<HybridLabel> imbalanced_labels(int n_hybrid, int n_non) {
  std::vector<HybridLabel> labels;
  for (int i = 0; i < n_hybrid; ++i) labels.push_back(HybridLabel::hybrid(0, 1));
  for (int i = 0; i < n_non; ++i) labels.push_back(HybridLabel::non_hybrid(0));
  return labels;
}

SynthDataset small_separable_dataset() {
  SynthConfig cfg;
  cfg.k_classes = 3;
  cfg.dim = 8;
  cfg.n_per_class = 20;
  cfg.n_hybrid = 12;
  cfg.noise_sigma = 0.0;
  cfg.mimic_shift = 0.0;
  cfg.seed = 5;
  return synth_dataset(cfg);
}

std::vector<SampleRecord> species_a(const SynthDataset& ds, EmbeddingMatrix& emb_out) {
  std::vector<SampleRecord> recs;
  emb_out.n = 0;
  emb_out.d = ds.embeddings.d;
  emb_out.data.clear();
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    if (ds.records[i].species_group != "A") continue;
    recs.push_back(ds.records[i]);
    const auto row = ds.embeddings.row(i);
    emb_out.data.insert(emb_out.data.end(), row.begin(), row.end());
    ++emb_out.n;
  }
  return recs;
}

}  // namespace

TEST_CASE("weighted sampler equalizes hybrid and non-hybrid draws") {
  const auto labels = imbalanced_labels(91, 2001);
  const WeightedSampler sampler(labels);
  Rng rng(1);
  const std::size_t n_draws = 100000;
  std::size_t hybrid_draws = 0;
  for (std::size_t i = 0; i < n_draws; ++i)
    hybrid_draws += sampler.next(rng) < 91 ? 1 : 0;
  const double fraction = static_cast<double>(hybrid_draws) / n_draws;
  CHECK(fraction > 0.49);
  CHECK(fraction < 0.51);
}

TEST_CASE("equal group sizes reduce to uniform sampling") {
  const auto labels = imbalanced_labels(200, 200);
  const WeightedSampler sampler(labels);
  Rng rng(2);
  std::vector<int> counts(400, 0);
  for (int i = 0; i < 40000; ++i) counts[sampler.next(rng)]++;
  // each index expects 100 draws; allow generous slack
  for (int c : counts) {
    CHECK(c > 40);
    CHECK(c < 180);
  }
}

TEST_CASE("sampler rejects single-group input") {
  CHECK_THROWS_AS(WeightedSampler(imbalanced_labels(0, 10)), ConfigError);
  CHECK_THROWS_AS(WeightedSampler(imbalanced_labels(10, 0)), ConfigError);
}

TEST_CASE("weighted_sample_indices is deterministic per rng seed") {
  const auto labels = imbalanced_labels(5, 50);
  Rng a(3), b(3);
  CHECK(weighted_sample_indices(labels, 100, a) == weighted_sample_indices(labels, 100, b));
}

TEST_CASE("training drives the loss to zero on separable data") {
  const auto ds = small_separable_dataset();
  EmbeddingMatrix emb;
  const auto recs = species_a(ds, emb);

  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 16;
  cfg.h1 = 32;
  cfg.h2 = 32;
  cfg.lr_head = 0.05;  // aggressive rate is fine on noise-free data
  cfg.seed = 9;
  const auto result = train(recs, emb, ds.taxonomy, cfg);
  REQUIRE(result.history.epochs.size() == 20);
  CHECK(result.history.epochs.back().mean_loss < 0.01);
}

TEST_CASE("training is bit-deterministic for a fixed seed") {
  const auto ds = small_separable_dataset();
  EmbeddingMatrix emb;
  const auto recs = species_a(ds, emb);

  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.h1 = 16;
  cfg.h2 = 16;
  cfg.seed = 31;

  const auto a = train(recs, emb, ds.taxonomy, cfg);
  const auto b = train(recs, emb, ds.taxonomy, cfg);
  CHECK(a.params.l1.w.v == b.params.l1.w.v);
  CHECK(a.params.l2.w.v == b.params.l2.w.v);
  CHECK(a.params.l3.w.v == b.params.l3.w.v);
  CHECK(a.params.l3.b == b.params.l3.b);
  CHECK(a.params.adapter->w.v == b.params.adapter->w.v);
  REQUIRE(a.history.epochs.size() == b.history.epochs.size());
  for (std::size_t e = 0; e < a.history.epochs.size(); ++e)
    CHECK(a.history.epochs[e].mean_loss == b.history.epochs[e].mean_loss);
  CHECK(a.split.train == b.split.train);
}

TEST_CASE("serial and parallel kernel modes train identically") {
  const auto ds = small_separable_dataset();
  EmbeddingMatrix emb;
  const auto recs = species_a(ds, emb);

  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.h1 = 16;
  cfg.h2 = 16;
  cfg.seed = 13;

  kernels::set_mode(kernels::Mode::Serial);
  const auto serial = train(recs, emb, ds.taxonomy, cfg);
  kernels::set_mode(kernels::Mode::Parallel);
  const auto parallel = train(recs, emb, ds.taxonomy, cfg);
  CHECK(serial.params.l1.w.v == parallel.params.l1.w.v);
  CHECK(serial.params.l3.w.v == parallel.params.l3.w.v);
  CHECK(serial.history.epochs.back().mean_loss == parallel.history.epochs.back().mean_loss);
}

TEST_CASE("zero epochs return initialized params and empty history") {
  const auto ds = small_separable_dataset();
  EmbeddingMatrix emb;
  const auto recs = species_a(ds, emb);

  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.h1 = 16;
  cfg.h2 = 16;
  cfg.seed = 4;
  const auto result = train(recs, emb, ds.taxonomy, cfg);
  CHECK(result.history.epochs.empty());
  CHECK(result.history.best_epoch == -1);
  const auto fresh = MlpParams::init(static_cast<int>(emb.d), 16, 16, ds.taxonomy.k(),
                                     true, derive_seed(4, "init"));
  CHECK(result.params.l1.w.v == fresh.l1.w.v);
}

TEST_CASE("a zero adapter learning rate freezes the adapter at identity") {
  const auto ds = small_separable_dataset();
  EmbeddingMatrix emb;
  const auto recs = species_a(ds, emb);

  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 8;
  cfg.h1 = 16;
  cfg.h2 = 16;
  cfg.lr_adapter = 0.0;
  cfg.seed = 6;
  const auto result = train(recs, emb, ds.taxonomy, cfg);
  REQUIRE(result.params.adapter.has_value());
  const int d = static_cast<int>(emb.d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      CHECK(result.params.adapter->w(i, j) == (i == j ? 1.0 : 0.0));
  for (double b : result.params.adapter->b) CHECK(b == 0.0);
}

TEST_CASE("loss is monotone non-increasing after warmup on separable data") {
  const auto ds = small_separable_dataset();
  EmbeddingMatrix emb;
  const auto recs = species_a(ds, emb);

  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 16;
  cfg.h1 = 32;
  cfg.h2 = 32;
  cfg.lr_head = 0.05;
  cfg.seed = 8;
  const auto result = train(recs, emb, ds.taxonomy, cfg);
  for (std::size_t e = 6; e < result.history.epochs.size(); ++e)
    CHECK(result.history.epochs[e].mean_loss <=
          result.history.epochs[e - 1].mean_loss + 1e-3);
}

TEST_CASE("unlabeled rows are rejected by training") {
  const auto ds = small_separable_dataset();
  EmbeddingMatrix emb;
  auto recs = species_a(ds, emb);
  recs[0].label = HybridLabel::unlabeled();
  TrainConfig cfg;
  cfg.epochs = 1;
  try {
    train(recs, emb, ds.taxonomy, cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("unlabeled sample in training set") !=
          std::string::npos);
  }
}

TEST_CASE("mismatched embedding rows are rejected") {
  const auto ds = small_separable_dataset();
  EmbeddingMatrix emb;
  auto recs = species_a(ds, emb);
  recs.pop_back();
  TrainConfig cfg;
  CHECK_THROWS_AS(train(recs, emb, ds.taxonomy, cfg), ConfigError);
}

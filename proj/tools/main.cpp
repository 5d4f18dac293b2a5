#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hybridet/augment.hpp"
#include "hybridet/data.hpp"
#include "hybridet/embedding.hpp"
#include "hybridet/error.hpp"
#include "hybridet/kernels.hpp"
#include "hybridet/metrics.hpp"
#include "hybridet/model_io.hpp"
#include "hybridet/rng.hpp"
#include "hybridet/scorer.hpp"
#include "hybridet/train.hpp"
#include "image_io.hpp"

namespace fs = std::filesystem;
using hybridet::ConfigError;
using nlohmann::json;

namespace {

// Exit codes: 0 success, 1 internal/runtime error, 2 config/validation error.
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

json load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed config JSON " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  return j;
}

// The config file is found before CLI11 parses so file values can seed the
// option defaults; explicit flags then win.
json prescan_config(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return load_config_file(argv[i + 1]);
    if (arg.rfind("--config=", 0) == 0) return load_config_file(arg.substr(9));
  }
  return json::object();
}

template <typename T>
void from_json_key(const json& j, const char* key, T& value) {
  if (j.contains(key)) value = j.at(key).get<T>();
}

void range_from_json(const json& j, const char* key, std::pair<double, double>& value) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 2)
    throw ConfigError(std::string("config: ") + key + " must be [lo, hi]");
  value = {a[0].get<double>(), a[1].get<double>()};
}

struct GlobalOpts {
  json config = json::object();
  std::uint64_t seed = 7;
  fs::path out = ".";
  bool serial = false;
};

void apply_global_config(GlobalOpts& g) {
  from_json_key(g.config, "seed", g.seed);
  if (g.config.contains("out")) g.out = g.config.at("out").get<std::string>();
}

hybridet::SynthConfig synth_config_from(const json& root, std::uint64_t seed) {
  hybridet::SynthConfig cfg;
  cfg.seed = seed;
  const json j = root.value("synth", json::object());
  from_json_key(j, "k_classes", cfg.k_classes);
  from_json_key(j, "dim", cfg.dim);
  from_json_key(j, "n_per_class", cfg.n_per_class);
  from_json_key(j, "n_hybrid", cfg.n_hybrid);
  from_json_key(j, "noise_sigma", cfg.noise_sigma);
  from_json_key(j, "mimic_shift", cfg.mimic_shift);
  return cfg;
}

hybridet::TrainConfig train_config_from(const json& root, std::uint64_t seed) {
  hybridet::TrainConfig cfg;
  cfg.seed = seed;
  const json j = root.value("train", json::object());
  from_json_key(j, "epochs", cfg.epochs);
  from_json_key(j, "batch_size", cfg.batch_size);
  from_json_key(j, "lr_head", cfg.lr_head);
  from_json_key(j, "lr_adapter", cfg.lr_adapter);
  from_json_key(j, "h1", cfg.h1);
  from_json_key(j, "h2", cfg.h2);
  from_json_key(j, "weight_decay", cfg.weight_decay);
  from_json_key(j, "momentum", cfg.momentum);
  from_json_key(j, "val_fraction", cfg.val_fraction);
  from_json_key(j, "score_threshold", cfg.score_threshold);
  from_json_key(j, "with_adapter", cfg.with_adapter);
  from_json_key(j, "keep_last", cfg.keep_last);
  return cfg;
}

hybridet::AugmentConfig augment_config_from(const json& root, std::uint64_t seed) {
  hybridet::AugmentConfig cfg;
  cfg.seed = seed;
  const json j = root.value("augment", json::object());
  from_json_key(j, "brightness", cfg.brightness);
  from_json_key(j, "contrast", cfg.contrast);
  from_json_key(j, "saturation", cfg.saturation);
  from_json_key(j, "hue", cfg.hue);
  range_from_json(j, "crop_scale", cfg.crop_scale);
  range_from_json(j, "crop_ratio", cfg.crop_ratio);
  from_json_key(j, "affine_degrees", cfg.affine_degrees);
  from_json_key(j, "affine_translate", cfg.affine_translate);
  range_from_json(j, "affine_scale", cfg.affine_scale);
  from_json_key(j, "out_h", cfg.out_h);
  from_json_key(j, "out_w", cfg.out_w);
  return cfg;
}

double threshold_from(const json& root) {
  return root.value("scorer", json::object()).value("threshold", 0.75);
}

hybridet::ReportConfig report_config_from(const json& root) {
  hybridet::ReportConfig cfg;
  const json j = root.value("eval", json::object());
  from_json_key(j, "recall_threshold", cfg.recall_threshold);
  from_json_key(j, "alt_positive_nonhybrid", cfg.alt_positive_nonhybrid);
  from_json_key(j, "alt_invert_score", cfg.alt_invert_score);
  if (j.contains("aggregate_weights"))
    for (const auto& [key, w] : j.at("aggregate_weights").items())
      cfg.aggregate_weights[key] = w.get<double>();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw hybridet::Error("cannot write file: " + path.string());
  out << text;
}

void write_scores_csv(const fs::path& path,
                      const std::vector<std::pair<std::string, double>>& scores) {
  std::string text = "id,score\n";
  char buf[64];
  for (const auto& [id, score] : scores) {
    std::snprintf(buf, sizeof(buf), "%.6f", score);
    text += id;
    text += ',';
    text += buf;
    text += '\n';
  }
  write_text(path, text);
}

std::vector<std::string> ids_of(const std::vector<hybridet::SampleRecord>& records) {
  std::vector<std::string> ids;
  ids.reserve(records.size());
  for (const auto& r : records) ids.push_back(r.id);
  return ids;
}

void check_alignment(const std::vector<hybridet::SampleRecord>& records,
                     const std::vector<std::string>& emb_ids) {
  if (records.size() != emb_ids.size())
    throw ConfigError("manifest has " + std::to_string(records.size()) +
                      " records but embeddings have " + std::to_string(emb_ids.size()) +
                      " rows");
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].id != emb_ids[i])
      throw ConfigError("row " + std::to_string(i) + ": manifest id '" + records[i].id +
                        "' does not match embedding id '" + emb_ids[i] + "'");
}

// ---------------------------------------------------------------- synth ----

int cmd_synth(const GlobalOpts& g, const hybridet::SynthConfig& cfg) {
  const auto ds = hybridet::synth_dataset(cfg);
  fs::create_directories(g.out);
  ds.taxonomy.to_json_file(g.out / "taxonomy.json");

  for (const std::string species : {"A", "B"}) {
    std::vector<hybridet::SampleRecord> records;
    hybridet::EmbeddingMatrix emb;
    emb.d = ds.embeddings.d;
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
      if (ds.records[i].species_group != species) continue;
      auto rec = ds.records[i];
      rec.source = std::to_string(records.size());  // row in the per-species file
      records.push_back(std::move(rec));
      const auto row = ds.embeddings.row(i);
      emb.data.insert(emb.data.end(), row.begin(), row.end());
      ++emb.n;
    }
    const auto base = g.out / ("species_" + species);
    hybridet::write_manifest(fs::path(base.string() + ".csv"), records, ds.taxonomy);
    hybridet::write_embeddings(emb, fs::path(base.string() + ".emb"), ids_of(records));
    std::cout << "species " << species << ": " << records.size() << " records, dim "
              << emb.d << "\n";
  }
  return 0;
}

// -------------------------------------------------------------- extract ----

struct ExtractOpts {
  fs::path manifest, taxonomy, out_emb;
  std::string command;
  double timeout = 60.0;
  bool augment = false;
  bool no_jitter = false;
};

std::vector<std::string> augment_images(const std::vector<hybridet::SampleRecord>& records,
                                        hybridet::AugmentConfig aug, const fs::path& dir,
                                        bool no_jitter) {
  if (no_jitter) {
    aug.brightness = aug.contrast = aug.saturation = aug.hue = 0.0;
  }
  fs::create_directories(dir);
  std::vector<std::string> out_paths;
  out_paths.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto img = hybridet::tools::load_image(records[i].source);
    hybridet::Rng rng(aug.seed ^ static_cast<std::uint64_t>(i));
    const auto augmented = hybridet::augment_pipeline(img, aug, rng);
    const fs::path out = dir / (records[i].id + ".png");
    hybridet::tools::save_png(out, augmented);
    out_paths.push_back(fs::absolute(out).string());
  }
  return out_paths;
}

int cmd_extract(const GlobalOpts& g, const ExtractOpts& opts) {
  const auto [taxonomy, records] = hybridet::load_manifest(opts.manifest, opts.taxonomy);
  std::vector<std::string> paths;
  paths.reserve(records.size());
  for (const auto& r : records) {
    if (r.source.empty())
      throw ConfigError("record '" + r.id + "' has no image path in its source field");
    paths.push_back(fs::absolute(r.source).string());
  }
  if (opts.augment) {
    auto aug = augment_config_from(g.config, hybridet::derive_seed(g.seed, "augment"));
    paths = augment_images(records, aug, g.out / "augmented", opts.no_jitter);
  }
  const auto matrix = hybridet::external_extract(opts.command, paths, opts.timeout);
  fs::create_directories(opts.out_emb.parent_path().empty() ? "."
                                                            : opts.out_emb.parent_path());
  hybridet::write_embeddings(matrix, opts.out_emb, ids_of(records));
  std::cout << "extracted " << matrix.n << " embeddings of dim " << matrix.d << "\n";
  return 0;
}

// ---------------------------------------------------------------- train ----

struct TrainOpts {
  fs::path manifest, taxonomy, embeddings;
  bool images = false;
  std::string command;
  double timeout = 60.0;
  bool no_jitter = false;
};

int cmd_train(const GlobalOpts& g, const TrainOpts& opts, hybridet::TrainConfig cfg) {
  const auto [taxonomy, records] = hybridet::load_manifest(opts.manifest, opts.taxonomy);

  hybridet::EmbeddingMatrix matrix;
  if (opts.images) {
    if (opts.command.empty())
      throw ConfigError("--images requires --command for the feature extractor");
    auto aug = augment_config_from(g.config, hybridet::derive_seed(g.seed, "augment"));
    const auto paths =
        augment_images(records, aug, g.out / "augmented", opts.no_jitter);
    matrix = hybridet::external_extract(opts.command, paths, opts.timeout);
  } else {
    auto file = hybridet::read_embeddings(opts.embeddings);
    check_alignment(records, file.ids);
    matrix = std::move(file.matrix);
  }

  const auto result = hybridet::train(records, matrix, taxonomy, cfg);
  fs::create_directories(g.out);
  hybridet::save_checkpoint(g.out / "checkpoint.json", result.params, taxonomy.hash(), cfg);
  write_text(g.out / "history.json", hybridet::history_to_json(result.history).dump(2) + "\n");

  json split_json;
  split_json["train"] = result.split.train;
  split_json["val"] = result.split.val;
  write_text(g.out / "split.json", split_json.dump(2) + "\n");
  std::string val_ids;
  for (const auto& id : result.split.val) val_ids += id + "\n";
  write_text(g.out / "val_ids.txt", val_ids);
  std::string train_ids;
  for (const auto& id : result.split.train) train_ids += id + "\n";
  write_text(g.out / "train_ids.txt", train_ids);

  if (!result.history.epochs.empty()) {
    const auto& last = result.history.epochs.back();
    std::cout << "trained " << result.history.epochs.size() << " epochs, final loss "
              << last.mean_loss << ", best epoch " << result.history.best_epoch << "\n";
  } else {
    std::cout << "trained 0 epochs\n";
  }
  return 0;
}

// ---------------------------------------------------------------- score ----

struct ScoreOpts {
  fs::path checkpoint, embeddings, taxonomy;
  std::string name = "scores.csv";
  double threshold = 0.75;
};

std::vector<std::pair<std::string, double>> score_embeddings(
    const fs::path& checkpoint, const hybridet::EmbeddingFile& file, double threshold,
    std::optional<std::uint64_t> taxonomy_hash) {
  const auto version = hybridet::checkpoint_version(checkpoint);
  if (version == "MLP1") {
    const auto ck = hybridet::load_checkpoint(checkpoint);
    if (taxonomy_hash && *taxonomy_hash != ck.taxonomy_hash)
      throw ConfigError("taxonomy does not match the checkpoint's taxonomy hash");
    return hybridet::score_batch(ck.params, file.matrix, file.ids,
                                 hybridet::ScorerConfig{threshold});
  }
  if (version == "SVM1") {
    const auto model = hybridet::load_svm(checkpoint);
    std::vector<std::pair<std::string, double>> out;
    out.reserve(file.matrix.n);
    for (std::uint32_t i = 0; i < file.matrix.n; ++i)
      out.emplace_back(file.ids[i], hybridet::svm_score(model, file.matrix.row(i)));
    return out;
  }
  throw ConfigError("unsupported checkpoint version '" + version + "'");
}

int cmd_score(const GlobalOpts& g, const ScoreOpts& opts) {
  const auto file = hybridet::read_embeddings(opts.embeddings);
  std::optional<std::uint64_t> hash;
  if (!opts.taxonomy.empty())
    hash = hybridet::load_taxonomy(opts.taxonomy).hash();
  const auto scores = score_embeddings(opts.checkpoint, file, opts.threshold, hash);
  fs::create_directories(g.out);
  write_scores_csv(g.out / opts.name, scores);
  std::cout << "scored " << scores.size() << " samples -> " << (g.out / opts.name).string()
            << "\n";
  return 0;
}

// ----------------------------------------------------------------- eval ----

struct EvalOpts {
  fs::path checkpoint, taxonomy;
  std::vector<std::string> eval_specs;  // manifest:embeddings[:ids_file]
  double threshold = 0.75;
  std::string ablate;
  fs::path train_manifest, train_embeddings;
  int svm_epochs = 20;
  double svm_lambda = 1e-4;
  bool no_jitter = false;
};

struct EvalSet {
  std::vector<hybridet::SampleRecord> records;  // filtered, labeled rows only
  hybridet::EmbeddingMatrix matrix;             // rows aligned with records
};

EvalSet load_eval_set(const std::string& spec, const hybridet::Taxonomy& taxonomy) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto colon = spec.find(':', start);
    if (colon == std::string::npos) {
      parts.push_back(spec.substr(start));
      break;
    }
    parts.push_back(spec.substr(start, colon - start));
    start = colon + 1;
  }
  if (parts.size() < 2 || parts.size() > 3)
    throw ConfigError("--eval expects <manifest>:<embeddings>[:<ids_file>], got: " + spec);

  const auto records = hybridet::load_records(parts[0], taxonomy);
  const auto file = hybridet::read_embeddings(parts[1]);
  check_alignment(records, file.ids);

  std::optional<std::unordered_set<std::string>> keep;
  if (parts.size() == 3) {
    std::ifstream in(parts[2]);
    if (!in) throw ConfigError("cannot open ids file: " + parts[2]);
    keep.emplace();
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) keep->insert(line);
    }
  }

  EvalSet set;
  set.matrix.d = file.matrix.d;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].label.is_labeled()) continue;  // unlabeled rows carry no truth
    if (keep && !keep->count(records[i].id)) continue;
    set.records.push_back(records[i]);
    const auto row = file.matrix.row(i);
    set.matrix.data.insert(set.matrix.data.end(), row.begin(), row.end());
    ++set.matrix.n;
  }
  if (set.records.empty())
    throw ConfigError("eval set has no labeled rows after filtering: " + spec);
  return set;
}

int cmd_eval(const GlobalOpts& g, const EvalOpts& opts) {
  if (opts.eval_specs.empty()) throw ConfigError("eval needs at least one --eval set");
  if (!opts.ablate.empty() && opts.ablate != "svm")
    throw ConfigError("unknown ablation '" + opts.ablate + "' (supported: svm)");

  const auto taxonomy = hybridet::load_taxonomy(opts.taxonomy);
  const auto ck = hybridet::load_checkpoint(opts.checkpoint);
  if (ck.taxonomy_hash != taxonomy.hash())
    throw ConfigError("taxonomy does not match the checkpoint's taxonomy hash");

  std::vector<EvalSet> sets;
  for (const auto& spec : opts.eval_specs) sets.push_back(load_eval_set(spec, taxonomy));

  auto report_cfg = report_config_from(g.config);
  const hybridet::ScorerConfig scorer_cfg{opts.threshold};

  struct Approach {
    std::string name;
    hybridet::EvalReport report;
  };
  std::vector<Approach> approaches;

  {
    std::vector<hybridet::LabeledScore> labeled;
    for (const auto& set : sets) {
      const auto scores =
          hybridet::score_batch(ck.params, set.matrix, ids_of(set.records), scorer_cfg);
      for (std::size_t i = 0; i < scores.size(); ++i)
        labeled.push_back({scores[i].first, scores[i].second,
                           set.records[i].label.is_hybrid(),
                           set.records[i].species_group});
    }
    approaches.push_back({"prob_filter", hybridet::build_report(labeled, report_cfg)});
  }

  if (opts.ablate == "svm") {
    if (opts.train_manifest.empty() || opts.train_embeddings.empty())
      throw ConfigError("--ablate svm needs --train-manifest and --train-embeddings");
    const auto train_records = hybridet::load_records(opts.train_manifest, taxonomy);
    auto train_file = hybridet::read_embeddings(opts.train_embeddings);
    check_alignment(train_records, train_file.ids);
    std::vector<int> labels;
    hybridet::EmbeddingMatrix train_matrix;
    train_matrix.d = train_file.matrix.d;
    for (std::size_t i = 0; i < train_records.size(); ++i) {
      if (!train_records[i].label.is_labeled()) continue;
      labels.push_back(train_records[i].label.is_hybrid() ? 1 : 0);
      const auto row = train_file.matrix.row(i);
      train_matrix.data.insert(train_matrix.data.end(), row.begin(), row.end());
      ++train_matrix.n;
    }
    const auto model = hybridet::svm_train(train_matrix, labels, opts.svm_epochs,
                                           opts.svm_lambda,
                                           hybridet::derive_seed(g.seed, "svm"));
    fs::create_directories(g.out);
    hybridet::save_svm(g.out / "svm.json", model);

    std::vector<hybridet::LabeledScore> labeled;
    for (const auto& set : sets) {
      for (std::uint32_t i = 0; i < set.matrix.n; ++i) {
        const auto& rec = set.records[i];
        labeled.push_back({rec.id, hybridet::svm_score(model, set.matrix.row(i)),
                           rec.label.is_hybrid(), rec.species_group});
      }
    }
    approaches.push_back({"svm", hybridet::build_report(labeled, report_cfg)});
  }

  json out_json;
  out_json["approaches"] = json::array();
  for (auto& [name, report] : approaches) {
    report.metadata["threshold"] = opts.threshold;
    report.metadata["jitter"] = !opts.no_jitter;
    report.metadata["seed"] = g.seed;
    std::cout << "approach: " << name << "\n" << hybridet::render_table(report) << "\n";
    json aj;
    aj["name"] = name;
    aj["report"] = hybridet::report_to_json(report);
    out_json["approaches"].push_back(aj);
  }
  fs::create_directories(g.out);
  write_text(g.out / "report.json", out_json.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  GlobalOpts g;
  try {
    g.config = prescan_config(argc, argv);
    apply_global_config(g);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  CLI::App app{"hybrid-butterfly anomaly detection pipeline"};
  app.require_subcommand(1);
  std::string config_path_unused;

  auto add_globals = [&](CLI::App* sub) {
    sub->add_option("--config", config_path_unused, "JSON config file");
    sub->add_option("--seed", g.seed, "top-level seed; every random stream derives from it");
    sub->add_option("--out", g.out, "output directory");
    sub->add_flag("--serial", g.serial, "disable OpenMP kernels");
  };

  // synth
  auto synth_cfg = synth_config_from(g.config, g.seed);
  auto* synth = app.add_subcommand("synth", "generate the two-species synthetic benchmark");
  add_globals(synth);
  synth->add_option("--k", synth_cfg.k_classes, "subspecies classes");
  synth->add_option("--dim", synth_cfg.dim, "embedding dimension");
  synth->add_option("--n-per-class", synth_cfg.n_per_class, "non-hybrids per class");
  synth->add_option("--n-hybrid", synth_cfg.n_hybrid, "hybrids per species");
  synth->add_option("--noise-sigma", synth_cfg.noise_sigma, "cluster noise");
  synth->add_option("--mimic-shift", synth_cfg.mimic_shift, "species-B mean displacement");

  // extract
  ExtractOpts ex;
  ex.out_emb = "embeddings.emb";
  auto* extract = app.add_subcommand("extract", "run an external feature extractor");
  add_globals(extract);
  extract->add_option("--manifest", ex.manifest, "manifest CSV")->required();
  extract->add_option("--taxonomy", ex.taxonomy, "taxonomy JSON")->required();
  extract->add_option("--command", ex.command, "extractor command (reads paths on stdin)")
      ->required();
  extract->add_option("--timeout", ex.timeout, "extractor timeout in seconds");
  extract->add_option("--out-emb", ex.out_emb, "output embedding file");
  extract->add_flag("--augment", ex.augment, "augment images before extraction");
  extract->add_flag("--no-jitter", ex.no_jitter, "disable color jitter in augmentation");

  // train
  TrainOpts tr;
  auto train_cfg = train_config_from(g.config, g.seed);
  auto* train = app.add_subcommand("train", "train the classifier head");
  add_globals(train);
  train->add_option("--manifest", tr.manifest, "manifest CSV")->required();
  train->add_option("--taxonomy", tr.taxonomy, "taxonomy JSON")->required();
  train->add_option("--embeddings", tr.embeddings, "embedding file");
  train->add_flag("--images", tr.images, "treat sources as images: augment+extract first");
  train->add_option("--command", tr.command, "extractor command for --images");
  train->add_option("--timeout", tr.timeout, "extractor timeout for --images");
  train->add_flag("--no-jitter", tr.no_jitter, "disable color jitter for --images");
  train->add_option("--epochs", train_cfg.epochs, "training epochs");
  train->add_option("--batch-size", train_cfg.batch_size, "batch size");
  train->add_option("--lr-head", train_cfg.lr_head, "head learning rate");
  train->add_option("--lr-adapter", train_cfg.lr_adapter, "adapter learning rate");
  train->add_option("--h1", train_cfg.h1, "first hidden width");
  train->add_option("--h2", train_cfg.h2, "second hidden width");
  train->add_option("--weight-decay", train_cfg.weight_decay, "L2 coefficient");
  train->add_option("--momentum", train_cfg.momentum, "SGD momentum");
  train->add_option("--val-fraction", train_cfg.val_fraction, "validation fraction");
  train->add_option("--val-threshold", train_cfg.score_threshold,
                    "anomaly threshold for the per-epoch val AUC");
  bool no_adapter = false;
  train->add_flag("--no-adapter", no_adapter, "drop the linear adapter");
  train->add_flag("--keep-last", train_cfg.keep_last,
                  "return the last epoch instead of the best val AUC");

  // score
  ScoreOpts sc;
  sc.threshold = threshold_from(g.config);
  auto* score = app.add_subcommand("score", "write id,score CSV for an embedding file");
  add_globals(score);
  score->add_option("--checkpoint", sc.checkpoint, "model checkpoint")->required();
  score->add_option("--embeddings", sc.embeddings, "embedding file")->required();
  score->add_option("--taxonomy", sc.taxonomy, "taxonomy JSON (hash check)");
  score->add_option("-t,--threshold", sc.threshold, "probability-filter threshold");
  score->add_option("--name", sc.name, "output CSV name");

  // eval
  EvalOpts ev;
  ev.threshold = threshold_from(g.config);
  auto* eval = app.add_subcommand("eval", "per-species AUC/recall report");
  add_globals(eval);
  eval->add_option("--checkpoint", ev.checkpoint, "model checkpoint")->required();
  eval->add_option("--taxonomy", ev.taxonomy, "taxonomy JSON")->required();
  eval->add_option("--eval", ev.eval_specs,
                   "<manifest>:<embeddings>[:<ids_file>] (repeatable)");
  eval->add_option("-t,--threshold", ev.threshold, "probability-filter threshold");
  eval->add_option("--ablate", ev.ablate, "add a baseline row (svm)");
  eval->add_option("--train-manifest", ev.train_manifest, "training manifest for --ablate");
  eval->add_option("--train-embeddings", ev.train_embeddings,
                   "training embeddings for --ablate");
  eval->add_option("--svm-epochs", ev.svm_epochs, "svm baseline epochs");
  eval->add_option("--svm-lambda", ev.svm_lambda, "svm regularization");
  eval->add_flag("--no-jitter", ev.no_jitter, "record a jitter-disabled run in metadata");
  double recall_threshold_flag = report_config_from(g.config).recall_threshold;
  eval->add_option("--recall-threshold", recall_threshold_flag, "recall decision threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    hybridet::kernels::set_mode(g.serial ? hybridet::kernels::Mode::Serial
                                         : hybridet::kernels::Mode::Parallel);
    if (synth->parsed()) {
      synth_cfg.seed = g.seed;
      return cmd_synth(g, synth_cfg);
    }
    if (extract->parsed()) return cmd_extract(g, ex);
    if (train->parsed()) {
      train_cfg.seed = g.seed;
      train_cfg.with_adapter = !no_adapter && train_cfg.with_adapter;
      return cmd_train(g, tr, train_cfg);
    }
    if (score->parsed()) return cmd_score(g, sc);
    if (eval->parsed()) {
      if (eval->count("--recall-threshold")) {
        g.config["eval"]["recall_threshold"] = recall_threshold_flag;
      }
      return cmd_eval(g, ev);
    }
    throw ConfigError("no subcommand given");
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

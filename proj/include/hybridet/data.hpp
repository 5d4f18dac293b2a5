#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hybridet {

struct TaxonClass {
  std::string name;
  std::string species;  // species group the subspecies belongs to
};

// Ordered list of subspecies classes. The class index is the classifier's
// output index, so order is part of the contract.
class Taxonomy {
 public:
  explicit Taxonomy(std::vector<TaxonClass> classes);

  int k() const { return static_cast<int>(classes_.size()); }
  const TaxonClass& cls(int i) const { return classes_.at(static_cast<std::size_t>(i)); }
  const std::vector<TaxonClass>& classes() const { return classes_; }
  std::optional<int> index_of(std::string_view name) const;

  // FNV-1a over names and species tags; stored in checkpoints to catch
  // taxonomy/checkpoint mismatches.
  std::uint64_t hash() const;

  static Taxonomy from_json_file(const std::filesystem::path& path);
  void to_json_file(const std::filesystem::path& path) const;

 private:
  std::vector<TaxonClass> classes_;
  std::unordered_map<std::string, int> index_;
};

// Label of one specimen. Hybrid parents are an unordered pair; the
// constructor normalizes them to class_a < class_b and rejects equal parents.
struct HybridLabel {
  enum class Kind { NonHybrid, Hybrid, Unlabeled };

  Kind kind = Kind::Unlabeled;
  int class_a = -1;
  int class_b = -1;

  static HybridLabel non_hybrid(int c);
  static HybridLabel hybrid(int parent_a, int parent_b);
  static HybridLabel unlabeled() { return HybridLabel{}; }

  bool is_hybrid() const { return kind == Kind::Hybrid; }
  bool is_labeled() const { return kind != Kind::Unlabeled; }

  bool operator==(const HybridLabel&) const = default;
};

struct SampleRecord {
  std::string id;
  HybridLabel label;
  std::string source;  // embedding row index or image file path
  std::string species_group;
};

// Length-K probability vector used as the training target: one-hot for a
// non-hybrid, 0.5/0.5 on the two parents for a hybrid.
using SoftTarget = std::vector<double>;

SoftTarget build_soft_target(const HybridLabel& label, const Taxonomy& taxonomy);

struct DatasetSplit {
  std::vector<std::string> train;  // sample ids
  std::vector<std::string> val;
};

// Parses the label grammar: nonhybrid:<class> | hybrid:<A>+<B> | unlabeled.
HybridLabel parse_label(std::string_view text, const Taxonomy& taxonomy);
std::string format_label(const HybridLabel& label, const Taxonomy& taxonomy);

Taxonomy load_taxonomy(const std::filesystem::path& path);

// CSV with header id,species_group,label,source. Errors carry line numbers.
std::vector<SampleRecord> load_records(const std::filesystem::path& path,
                                       const Taxonomy& taxonomy);

std::pair<Taxonomy, std::vector<SampleRecord>> load_manifest(
    const std::filesystem::path& manifest_csv,
    const std::filesystem::path& taxonomy_json);

void write_manifest(const std::filesystem::path& path,
                    const std::vector<SampleRecord>& records,
                    const Taxonomy& taxonomy);

// Splits labeled records into train/val, preserving the hybrid/non-hybrid
// ratio within one sample per stratum. Deterministic for a fixed seed.
DatasetSplit stratified_split(const std::vector<SampleRecord>& records,
                              double val_fraction, std::uint64_t seed);

// Maps ids back to record indices (manifest order == embedding row order).
std::vector<std::size_t> rows_of(const std::vector<std::string>& ids,
                                 const std::vector<SampleRecord>& records);

}  // namespace hybridet

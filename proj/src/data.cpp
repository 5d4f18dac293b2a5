#include "hybridet/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hybridet/error.hpp"
#include "hybridet/rng.hpp"

namespace hybridet {

using nlohmann::json;

Taxonomy::Taxonomy(std::vector<TaxonClass> classes) : classes_(std::move(classes)) {
  if (classes_.size() < 2) throw ConfigError("taxonomy needs at least 2 classes");
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    const auto& c = classes_[i];
    if (c.name.empty()) throw ConfigError("taxonomy class name is empty");
    if (c.species.empty())
      throw ConfigError("taxonomy class '" + c.name + "' has no species group");
    if (!index_.emplace(c.name, static_cast<int>(i)).second)
      throw ConfigError("duplicate taxonomy class '" + c.name + "'");
  }
}

std::optional<int> Taxonomy::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t Taxonomy::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0x1f;  // field separator
    h *= 0x100000001b3ULL;
  };
  for (const auto& c : classes_) {
    mix(c.name);
    mix(c.species);
  }
  return h;
}

Taxonomy Taxonomy::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open taxonomy file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed taxonomy JSON in " + path.string() + ": " + e.what());
  }
  if (!j.contains("classes") || !j["classes"].is_array())
    throw ConfigError("taxonomy JSON missing 'classes' array: " + path.string());
  std::vector<TaxonClass> classes;
  for (const auto& c : j["classes"]) {
    if (!c.contains("name") || !c.contains("species"))
      throw ConfigError("taxonomy class entry needs 'name' and 'species': " + path.string());
    classes.push_back({c["name"].get<std::string>(), c["species"].get<std::string>()});
  }
  return Taxonomy(std::move(classes));
}

void Taxonomy::to_json_file(const std::filesystem::path& path) const {
  json j;
  j["classes"] = json::array();
  for (const auto& c : classes_)
    j["classes"].push_back({{"name", c.name}, {"species", c.species}});
  std::ofstream out(path);
  if (!out) throw Error("cannot write taxonomy file: " + path.string());
  out << j.dump(2) << "\n";
}

HybridLabel HybridLabel::non_hybrid(int c) {
  if (c < 0) throw ConfigError("non-hybrid class index must be non-negative");
  HybridLabel l;
  l.kind = Kind::NonHybrid;
  l.class_a = c;
  return l;
}

HybridLabel HybridLabel::hybrid(int parent_a, int parent_b) {
  if (parent_a < 0 || parent_b < 0)
    throw ConfigError("hybrid parent indices must be non-negative");
  if (parent_a == parent_b)
    throw ConfigError("hybrid parents must be two different subspecies");
  HybridLabel l;
  l.kind = Kind::Hybrid;
  l.class_a = std::min(parent_a, parent_b);
  l.class_b = std::max(parent_a, parent_b);
  return l;
}

SoftTarget build_soft_target(const HybridLabel& label, const Taxonomy& taxonomy) {
  const int k = taxonomy.k();
  if (!label.is_labeled())
    throw ConfigError("target undefined for unlabeled sample");
  if (label.class_a >= k || (label.is_hybrid() && label.class_b >= k))
    throw ConfigError("label class index out of range for taxonomy");
  SoftTarget t(static_cast<std::size_t>(k), 0.0);
  if (label.is_hybrid()) {
    if (label.class_a == label.class_b)
      throw ConfigError("hybrid parents must be two different subspecies");
    t[static_cast<std::size_t>(label.class_a)] = 0.5;
    t[static_cast<std::size_t>(label.class_b)] = 0.5;
  } else {
    t[static_cast<std::size_t>(label.class_a)] = 1.0;
  }
  return t;
}

HybridLabel parse_label(std::string_view text, const Taxonomy& taxonomy) {
  auto class_index = [&](std::string_view name) {
    auto idx = taxonomy.index_of(name);
    if (!idx) throw ConfigError("unknown class name '" + std::string(name) + "'");
    return *idx;
  };
  if (text == "unlabeled") return HybridLabel::unlabeled();
  if (text.rfind("nonhybrid:", 0) == 0)
    return HybridLabel::non_hybrid(class_index(text.substr(10)));
  if (text.rfind("hybrid:", 0) == 0) {
    std::string_view rest = text.substr(7);
    auto plus = rest.find('+');
    if (plus == std::string_view::npos || plus == 0 || plus + 1 == rest.size())
      throw ConfigError("malformed hybrid label '" + std::string(text) + "'");
    return HybridLabel::hybrid(class_index(rest.substr(0, plus)),
                               class_index(rest.substr(plus + 1)));
  }
  throw ConfigError("malformed label '" + std::string(text) + "'");
}

std::string format_label(const HybridLabel& label, const Taxonomy& taxonomy) {
  switch (label.kind) {
    case HybridLabel::Kind::Unlabeled:
      return "unlabeled";
    case HybridLabel::Kind::NonHybrid:
      return "nonhybrid:" + taxonomy.cls(label.class_a).name;
    case HybridLabel::Kind::Hybrid:
      return "hybrid:" + taxonomy.cls(label.class_a).name + "+" +
             taxonomy.cls(label.class_b).name;
  }
  throw Error("unreachable label kind");
}

Taxonomy load_taxonomy(const std::filesystem::path& path) {
  return Taxonomy::from_json_file(path);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

std::vector<SampleRecord> load_records(const std::filesystem::path& path,
                                       const Taxonomy& taxonomy) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest file: " + path.string());

  auto fail = [&](int line_no, const std::string& what) {
    throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + what);
  };

  std::vector<SampleRecord> records;
  std::unordered_map<std::string, int> seen_ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != "id,species_group,label,source")
        fail(line_no, "expected header 'id,species_group,label,source'");
      continue;
    }
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 4)
      fail(line_no, "expected 4 fields, got " + std::to_string(fields.size()));
    SampleRecord rec;
    rec.id = fields[0];
    rec.species_group = fields[1];
    rec.source = fields[3];
    if (rec.id.empty()) fail(line_no, "empty id");
    if (rec.species_group.empty()) fail(line_no, "empty species_group");
    auto [it, inserted] = seen_ids.emplace(rec.id, line_no);
    if (!inserted)
      fail(line_no, "duplicate id '" + rec.id + "' (first seen at line " +
                        std::to_string(it->second) + ")");
    try {
      rec.label = parse_label(fields[2], taxonomy);
    } catch (const ConfigError& e) {
      fail(line_no, e.what());
    }
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw ConfigError("no records in manifest: " + path.string());
  return records;
}

std::pair<Taxonomy, std::vector<SampleRecord>> load_manifest(
    const std::filesystem::path& manifest_csv,
    const std::filesystem::path& taxonomy_json) {
  Taxonomy taxonomy = load_taxonomy(taxonomy_json);
  auto records = load_records(manifest_csv, taxonomy);
  return {std::move(taxonomy), std::move(records)};
}

void write_manifest(const std::filesystem::path& path,
                    const std::vector<SampleRecord>& records,
                    const Taxonomy& taxonomy) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest file: " + path.string());
  out << "id,species_group,label,source\n";
  for (const auto& r : records)
    out << r.id << ',' << r.species_group << ',' << format_label(r.label, taxonomy)
        << ',' << r.source << '\n';
}

DatasetSplit stratified_split(const std::vector<SampleRecord>& records,
                              double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw ConfigError("val_fraction must be in (0, 1)");

  std::vector<std::size_t> hybrid_rows, nonhybrid_rows;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].label.is_labeled()) continue;
    (records[i].label.is_hybrid() ? hybrid_rows : nonhybrid_rows).push_back(i);
  }
  for (const auto* stratum : {&hybrid_rows, &nonhybrid_rows}) {
    if (stratum->size() < 2)
      throw ConfigError("stratum too small: need at least 2 hybrid and 2 non-hybrid samples");
  }

  Rng rng(seed);
  DatasetSplit split;
  auto take = [&](std::vector<std::size_t>& rows) {
    // Fisher-Yates, then the leading round(f*n) rows go to val.
    for (std::size_t i = rows.size(); i > 1; --i) {
      std::size_t j = rng.uniform_below(i);
      std::swap(rows[i - 1], rows[j]);
    }
    auto n_val = static_cast<std::size_t>(
        std::llround(val_fraction * static_cast<double>(rows.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, rows.size() - 1);
    for (std::size_t i = 0; i < rows.size(); ++i)
      (i < n_val ? split.val : split.train).push_back(records[rows[i]].id);
  };
  take(hybrid_rows);
  take(nonhybrid_rows);
  // Stable output order: manifest order within each partition.
  std::unordered_map<std::string, std::size_t> order;
  for (std::size_t i = 0; i < records.size(); ++i) order.emplace(records[i].id, i);
  auto by_row = [&](const std::string& a, const std::string& b) {
    return order.at(a) < order.at(b);
  };
  std::sort(split.train.begin(), split.train.end(), by_row);
  std::sort(split.val.begin(), split.val.end(), by_row);
  return split;
}

std::vector<std::size_t> rows_of(const std::vector<std::string>& ids,
                                 const std::vector<SampleRecord>& records) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < records.size(); ++i) index.emplace(records[i].id, i);
  std::vector<std::size_t> rows;
  rows.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = index.find(id);
    if (it == index.end()) throw ConfigError("unknown sample id '" + id + "'");
    rows.push_back(it->second);
  }
  return rows;
}

}  // namespace hybridet

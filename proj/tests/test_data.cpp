#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "hybridet/data.hpp"
#include "hybridet/error.hpp"
#include "hybridet/rng.hpp"

using namespace hybridet;
namespace fs = std::filesystem;

namespace {

Taxonomy make_taxonomy(int k) {
  std::vector<TaxonClass> classes;
  for (int i = 0; i < k; ++i) classes.push_back({"cls_" + std::to_string(i), "A"});
  return Taxonomy(std::move(classes));
}

fs::path temp_file(const std::string& name, const std::string& content) {
  const fs::path p = fs::temp_directory_path() / ("hybridet_data_" + name);
  std::ofstream out(p);
  out << content;
  return p;
}

}  // namespace

TEST_CASE("soft target is one-hot for a non-hybrid") {
  const auto tax = make_taxonomy(4);
  const auto t = build_soft_target(HybridLabel::non_hybrid(2), tax);
  CHECK(t == SoftTarget{0, 0, 1, 0});
}

TEST_CASE("soft target splits mass across hybrid parents") {
  const auto tax = make_taxonomy(4);
  const auto t = build_soft_target(HybridLabel::hybrid(0, 3), tax);
  CHECK(t == SoftTarget{0.5, 0, 0, 0.5});
  // parent order does not matter
  CHECK(build_soft_target(HybridLabel::hybrid(3, 0), tax) == t);
}

TEST_CASE("equal hybrid parents are rejected") {
  CHECK_THROWS_AS(HybridLabel::hybrid(1, 1), ConfigError);
}

TEST_CASE("unlabeled records have no target") {
  const auto tax = make_taxonomy(3);
  CHECK_THROWS_WITH_AS(build_soft_target(HybridLabel::unlabeled(), tax),
                       "target undefined for unlabeled sample", ConfigError);
}

TEST_CASE("soft targets are distributions with the right support") {
  const auto tax = make_taxonomy(6);
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    HybridLabel label;
    if (trial % 2 == 0) {
      label = HybridLabel::non_hybrid(static_cast<int>(rng.uniform_below(6)));
    } else {
      const int a = static_cast<int>(rng.uniform_below(6));
      int b = static_cast<int>(rng.uniform_below(5));
      if (b >= a) ++b;
      label = HybridLabel::hybrid(a, b);
    }
    const auto t = build_soft_target(label, tax);
    double sum = 0.0;
    int nonzero = 0;
    for (double v : t) {
      CHECK(v >= 0.0);
      sum += v;
      nonzero += v != 0.0 ? 1 : 0;
    }
    CHECK(sum == 1.0);
    CHECK(nonzero == (label.is_hybrid() ? 2 : 1));
  }
}

TEST_CASE("manifest round trip and parse errors") {
  const auto tax_path = temp_file("tax.json", R"({"classes":[
    {"name":"cls_0","species":"A"},{"name":"cls_1","species":"A"}]})");

  SUBCASE("valid manifest parses") {
    const auto man = temp_file("ok.csv",
                               "id,species_group,label,source\n"
                               "s1,A,nonhybrid:cls_0,0\n"
                               "s2,A,hybrid:cls_0+cls_1,1\n"
                               "s3,B,unlabeled,2\n");
    auto [taxonomy, records] = load_manifest(man, tax_path);
    CHECK(taxonomy.k() == 2);
    REQUIRE(records.size() == 3);
    CHECK(records[0].label == HybridLabel::non_hybrid(0));
    CHECK(records[1].label == HybridLabel::hybrid(0, 1));
    CHECK_FALSE(records[2].label.is_labeled());
    CHECK(records[2].species_group == "B");
  }

  SUBCASE("same-parent hybrid is rejected with a line number") {
    const auto man = temp_file("dup_parent.csv",
                               "id,species_group,label,source\n"
                               "s1,A,nonhybrid:cls_0,0\n"
                               "s2,A,hybrid:cls_0+cls_0,1\n");
    try {
      load_manifest(man, tax_path);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    }
  }

  SUBCASE("duplicate ids are rejected") {
    const auto man = temp_file("dup_id.csv",
                               "id,species_group,label,source\n"
                               "s1,A,nonhybrid:cls_0,0\n"
                               "s1,A,nonhybrid:cls_1,1\n");
    CHECK_THROWS_AS(load_manifest(man, tax_path), ConfigError);
  }

  SUBCASE("unknown class name is rejected") {
    const auto man = temp_file("unknown.csv",
                               "id,species_group,label,source\n"
                               "s1,A,nonhybrid:cls_9,0\n");
    CHECK_THROWS_AS(load_manifest(man, tax_path), ConfigError);
  }

  SUBCASE("empty manifest is rejected") {
    const auto man = temp_file("empty.csv", "id,species_group,label,source\n");
    try {
      load_records(man, load_taxonomy(tax_path));
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("no records") != std::string::npos);
    }
  }
}

TEST_CASE("write_manifest inverts load_records") {
  const auto tax = make_taxonomy(3);
  std::vector<SampleRecord> records{
      {"a", HybridLabel::non_hybrid(1), "img/a.png", "A"},
      {"b", HybridLabel::hybrid(0, 2), "img/b.png", "A"},
      {"c", HybridLabel::unlabeled(), "img/c.png", "B"},
  };
  const fs::path p = fs::temp_directory_path() / "hybridet_data_roundtrip.csv";
  write_manifest(p, records, tax);
  const auto loaded = load_records(p, tax);
  REQUIRE(loaded.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(loaded[i].id == records[i].id);
    CHECK(loaded[i].label == records[i].label);
    CHECK(loaded[i].source == records[i].source);
    CHECK(loaded[i].species_group == records[i].species_group);
  }
}

namespace {

std::vector<SampleRecord> mixed_records(int n_hybrid, int n_non) {
  std::vector<SampleRecord> records;
  for (int i = 0; i < n_hybrid; ++i)
    records.push_back({"h" + std::to_string(i), HybridLabel::hybrid(0, 1), "", "A"});
  for (int i = 0; i < n_non; ++i)
    records.push_back({"n" + std::to_string(i), HybridLabel::non_hybrid(i % 2), "", "A"});
  return records;
}

}  // namespace

TEST_CASE("stratified split preserves the class ratio") {
  const auto records = mixed_records(10, 90);
  const auto split = stratified_split(records, 0.2, 42);
  int val_hyb = 0, val_non = 0;
  for (const auto& id : split.val) (id[0] == 'h' ? val_hyb : val_non)++;
  CHECK(val_hyb == 2);
  CHECK(val_non == 18);
  CHECK(split.train.size() + split.val.size() == records.size());
}

TEST_CASE("stratified split is deterministic and a partition") {
  const auto records = mixed_records(7, 33);
  const auto a = stratified_split(records, 0.3, 7);
  const auto b = stratified_split(records, 0.3, 7);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);

  std::set<std::string> all(a.train.begin(), a.train.end());
  for (const auto& id : a.val) CHECK(all.insert(id).second);
  CHECK(all.size() == records.size());

  const auto c = stratified_split(records, 0.3, 8);
  CHECK(a.val != c.val);  // different seed shuffles differently
}

TEST_CASE("a stratum with fewer than 2 samples is rejected") {
  auto records = mixed_records(1, 50);
  CHECK_THROWS_WITH_AS(stratified_split(records, 0.2, 1),
                       "stratum too small: need at least 2 hybrid and 2 non-hybrid samples",
                       ConfigError);
}

TEST_CASE("unlabeled records are excluded from splits") {
  auto records = mixed_records(4, 10);
  records.push_back({"u0", HybridLabel::unlabeled(), "", "A"});
  const auto split = stratified_split(records, 0.25, 3);
  CHECK(split.train.size() + split.val.size() == 14);
  for (const auto& id : split.val) CHECK(id != "u0");
  for (const auto& id : split.train) CHECK(id != "u0");
}

TEST_CASE("taxonomy invariants") {
  CHECK_THROWS_AS(Taxonomy(std::vector<TaxonClass>{{"only", "A"}}), ConfigError);
  CHECK_THROWS_AS(Taxonomy(std::vector<TaxonClass>{{"x", "A"}, {"x", "A"}}), ConfigError);
  const auto tax = make_taxonomy(3);
  CHECK(tax.index_of("cls_1") == 1);
  CHECK_FALSE(tax.index_of("nope").has_value());
  CHECK(tax.hash() == make_taxonomy(3).hash());
  CHECK(tax.hash() != make_taxonomy(4).hash());
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = HYBRIDET_CLI_PATH;

fs::path make_workdir(const std::string& tag) {
  const fs::path dir =
      fs::temp_directory_path() / ("hybridet_cli_" + tag + "_" + std::to_string(getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int line_count(const fs::path& p) {
  const auto text = slurp(p);
  int n = 0;
  for (char c : text) n += c == '\n' ? 1 : 0;
  return n;
}

// Small synthetic run shared by the pipeline tests.
struct Pipeline {
  fs::path dir;
  std::string synth_args;

  explicit Pipeline(const std::string& tag) : dir(make_workdir(tag)) {
    synth_args = "synth --seed 11 --k 3 --dim 8 --n-per-class 12 --n-hybrid 8 "
                 "--noise-sigma 0.5 --out " +
                 dir.string();
    REQUIRE(run_cli(synth_args) == 0);
  }

  std::string train_args(const std::string& extra = "") const {
    return "train --seed 11 --manifest " + (dir / "species_A.csv").string() +
           " --taxonomy " + (dir / "taxonomy.json").string() + " --embeddings " +
           (dir / "species_A.emb").string() + " --epochs 6 --h1 16 --h2 16 --out " +
           dir.string() + extra;
  }
};

}  // namespace

TEST_CASE("synth writes per-species manifests and embeddings") {
  const auto dir = make_workdir("synth");
  REQUIRE(run_cli("synth --seed 3 --k 4 --dim 6 --n-per-class 5 --n-hybrid 3 --out " +
                  dir.string()) == 0);
  CHECK(fs::exists(dir / "taxonomy.json"));
  for (const std::string s : {"A", "B"}) {
    CHECK(fs::exists(dir / ("species_" + s + ".csv")));
    CHECK(fs::exists(dir / ("species_" + s + ".emb")));
    CHECK(fs::exists(dir / ("species_" + s + ".emb.ids")));
    // header + k*n_per_class + n_hybrid rows
    CHECK(line_count(dir / ("species_" + s + ".csv")) == 1 + 4 * 5 + 3);
  }
}

TEST_CASE("synth rejects invalid configs with exit code 2") {
  const auto dir = make_workdir("synth_bad");
  CHECK(run_cli("synth --k 1 --out " + dir.string()) == 2);
}

TEST_CASE("synth is byte-deterministic per seed") {
  const auto a = make_workdir("synth_a");
  const auto b = make_workdir("synth_b");
  const std::string args = "synth --seed 5 --k 3 --dim 4 --n-per-class 4 --n-hybrid 2 --out ";
  REQUIRE(run_cli(args + a.string()) == 0);
  REQUIRE(run_cli(args + b.string()) == 0);
  CHECK(slurp(a / "species_A.emb") == slurp(b / "species_A.emb"));
  CHECK(slurp(a / "species_B.csv") == slurp(b / "species_B.csv"));
}

TEST_CASE("train writes checkpoint, history and split files") {
  Pipeline p("train");
  REQUIRE(run_cli(p.train_args()) == 0);
  CHECK(fs::exists(p.dir / "checkpoint.json"));
  CHECK(fs::exists(p.dir / "history.json"));
  CHECK(fs::exists(p.dir / "split.json"));
  CHECK(fs::exists(p.dir / "val_ids.txt"));

  const auto history = json::parse(slurp(p.dir / "history.json"));
  CHECK(history["epochs"].size() == 6);

  const auto ck = json::parse(slurp(p.dir / "checkpoint.json"));
  CHECK(ck["version"] == "MLP1");
  CHECK(ck["dims"]["k"] == 3);
}

TEST_CASE("training reruns are byte-identical for a fixed seed") {
  Pipeline p("det");
  REQUIRE(run_cli(p.train_args()) == 0);
  const auto first = slurp(p.dir / "checkpoint.json");
  REQUIRE(run_cli(p.train_args()) == 0);
  CHECK(slurp(p.dir / "checkpoint.json") == first);
}

TEST_CASE("unlabeled manifest rows make train exit with code 2") {
  Pipeline p("unlabeled");
  // rewrite one row's label as unlabeled
  auto text = slurp(p.dir / "species_A.csv");
  const auto pos = text.find("nonhybrid:sub0");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, std::string("nonhybrid:sub0").size(), "unlabeled");
  std::ofstream(p.dir / "species_A.csv") << text;
  CHECK(run_cli(p.train_args()) == 2);
}

TEST_CASE("score writes one row per sample with six decimals") {
  Pipeline p("score");
  REQUIRE(run_cli(p.train_args()) == 0);
  REQUIRE(run_cli("score --checkpoint " + (p.dir / "checkpoint.json").string() +
                  " --embeddings " + (p.dir / "species_B.emb").string() + " --taxonomy " +
                  (p.dir / "taxonomy.json").string() + " --out " + p.dir.string()) == 0);
  const auto csv = slurp(p.dir / "scores.csv");
  CHECK(line_count(p.dir / "scores.csv") == 1 + 3 * 12 + 8);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "id,score");
  int checked = 0;
  while (std::getline(lines, line)) {
    const auto comma = line.rfind(',');
    REQUIRE(comma != std::string::npos);
    const std::string value = line.substr(comma + 1);
    REQUIRE(value.size() == 8);  // 0.xxxxxx or 1.000000
    const double v = std::stod(value);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    ++checked;
  }
  CHECK(checked == 3 * 12 + 8);

  // determinism
  const auto first = csv;
  REQUIRE(run_cli("score --checkpoint " + (p.dir / "checkpoint.json").string() +
                  " --embeddings " + (p.dir / "species_B.emb").string() + " --out " +
                  p.dir.string()) == 0);
  CHECK(slurp(p.dir / "scores.csv") == first);
}

TEST_CASE("score rejects a mismatched taxonomy with exit code 2") {
  Pipeline p("score_tax");
  REQUIRE(run_cli(p.train_args()) == 0);
  // a taxonomy with different classes has a different hash
  std::ofstream(p.dir / "other_tax.json")
      << R"({"classes":[{"name":"x","species":"A"},{"name":"y","species":"A"}]})";
  CHECK(run_cli("score --checkpoint " + (p.dir / "checkpoint.json").string() +
                " --embeddings " + (p.dir / "species_B.emb").string() + " --taxonomy " +
                (p.dir / "other_tax.json").string() + " --out " + p.dir.string()) == 2);
}

TEST_CASE("eval reports both species groups and records flags") {
  Pipeline p("eval");
  REQUIRE(run_cli(p.train_args()) == 0);
  const std::string eval_base =
      "eval --seed 11 --checkpoint " + (p.dir / "checkpoint.json").string() +
      " --taxonomy " + (p.dir / "taxonomy.json").string() + " --eval " +
      (p.dir / "species_A.csv").string() + ":" + (p.dir / "species_A.emb").string() + ":" +
      (p.dir / "val_ids.txt").string() + " --eval " + (p.dir / "species_B.csv").string() +
      ":" + (p.dir / "species_B.emb").string();

  REQUIRE(run_cli(eval_base + " --out " + p.dir.string()) == 0);
  const auto report = json::parse(slurp(p.dir / "report.json"));
  REQUIRE(report["approaches"].size() == 1);
  CHECK(report["approaches"][0]["name"] == "prob_filter");
  const auto& groups = report["approaches"][0]["report"]["groups"];
  REQUIRE(groups.size() == 2);
  CHECK(groups[0]["group"] == "A");
  CHECK(groups[1]["group"] == "B");
  CHECK(report["approaches"][0]["report"]["metadata"]["jitter"] == true);

  SUBCASE("svm ablation adds a baseline approach") {
    const auto dir2 = make_workdir("eval_svm");
    REQUIRE(run_cli(eval_base + " --ablate svm --train-manifest " +
                    (p.dir / "species_A.csv").string() + " --train-embeddings " +
                    (p.dir / "species_A.emb").string() + " --out " + dir2.string()) == 0);
    const auto r2 = json::parse(slurp(dir2 / "report.json"));
    REQUIRE(r2["approaches"].size() == 2);
    CHECK(r2["approaches"][0]["name"] == "prob_filter");
    CHECK(r2["approaches"][1]["name"] == "svm");
    CHECK(fs::exists(dir2 / "svm.json"));
  }

  SUBCASE("disabled jitter is recorded in the report metadata") {
    const auto dir3 = make_workdir("eval_nojit");
    REQUIRE(run_cli(eval_base + " --no-jitter --out " + dir3.string()) == 0);
    const auto r3 = json::parse(slurp(dir3 / "report.json"));
    CHECK(r3["approaches"][0]["report"]["metadata"]["jitter"] == false);
  }

  SUBCASE("eval without sets exits with code 2") {
    CHECK(run_cli("eval --checkpoint " + (p.dir / "checkpoint.json").string() +
                  " --taxonomy " + (p.dir / "taxonomy.json").string() + " --out " +
                  p.dir.string()) == 2);
  }
}

TEST_CASE("extract runs a stub command against manifest sources") {
  const auto dir = make_workdir("extract");
  std::ofstream(dir / "tax.json")
      << R"({"classes":[{"name":"c0","species":"A"},{"name":"c1","species":"A"}]})";
  std::ofstream(dir / "m.csv") << "id,species_group,label,source\n"
                               << "i0,A,nonhybrid:c0,/fake/img0.png\n"
                               << "i1,A,nonhybrid:c1,/fake/img1.png\n";
  REQUIRE(run_cli("extract --manifest " + (dir / "m.csv").string() + " --taxonomy " +
                  (dir / "tax.json").string() +
                  " --command \"awk '{print length($0), 1, 2}'\" --out-emb " +
                  (dir / "e.emb").string() + " --out " + dir.string()) == 0);
  CHECK(fs::exists(dir / "e.emb"));
  const auto ids = slurp(dir / "e.emb.ids");
  CHECK(ids == "i0\ni1\n");

  // a failing extractor is a runtime error: exit code 1
  CHECK(run_cli("extract --manifest " + (dir / "m.csv").string() + " --taxonomy " +
                (dir / "tax.json").string() + " --command \"exit 7\" --out-emb " +
                (dir / "e2.emb").string() + " --out " + dir.string()) == 1);
}

TEST_CASE("config file values are used and flags override them") {
  const auto dir = make_workdir("config");
  std::ofstream(dir / "cfg.json") << R"({
    "seed": 21,
    "synth": {"k_classes": 3, "dim": 5, "n_per_class": 4, "n_hybrid": 2}
  })";
  REQUIRE(run_cli("synth --config " + (dir / "cfg.json").string() + " --out " +
                  dir.string()) == 0);
  CHECK(line_count(dir / "species_A.csv") == 1 + 3 * 4 + 2);

  // flag beats config: k 2 -> 2*4+2 rows
  const auto dir2 = make_workdir("config2");
  REQUIRE(run_cli("synth --config " + (dir / "cfg.json").string() + " --k 2 --out " +
                  dir2.string()) == 0);
  CHECK(line_count(dir2 / "species_A.csv") == 1 + 2 * 4 + 2);
}

TEST_CASE("unknown flags exit with code 2") {
  CHECK(run_cli("synth --definitely-not-a-flag") == 2);
  CHECK(run_cli("") == 2);
}

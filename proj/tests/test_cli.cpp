#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const char* cli_path() { return EVIDENCE3_CLI_PATH; }

// Runs the CLI through the shell and returns its exit code.
int run_cli(const std::string& args, const std::string& env = "") {
  std::string cmd = env.empty() ? "" : env + " ";
  cmd += std::string("\"") + cli_path() + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

std::size_t line_count(const fs::path& path) {
  const std::string bytes = read_bytes(path);
  return static_cast<std::size_t>(
      std::count(bytes.begin(), bytes.end(), '\n'));
}

// Collects every regular file under root, sorted by relative path, and
// concatenates their bytes so two directory trees can be compared.
std::string tree_fingerprint(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::string combined;
  for (const fs::path& f : files) {
    combined += fs::relative(f, root).string();
    combined += '\0';
    combined += read_bytes(f);
    combined += '\0';
  }
  return combined;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const char* tag) {
    path = fs::temp_directory_path() / (std::string("ev3_cli_") + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const char* name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("gen writes count records plus their scene images") {
  TempDir dir("gen");
  REQUIRE(run_cli("gen --out " + dir.str("m.jsonl") + " --count 4 --quiet") == 0);
  CHECK(line_count(dir.path / "m.jsonl") == 4);
  std::size_t images = 0;
  for (const auto& entry :
       fs::directory_iterator(dir.path / "m_images"))
    images += entry.is_regular_file() ? 1 : 0;
  CHECK(images == 4);
}

TEST_CASE("calibrate produces a stats file and reruns byte-identically") {
  TempDir dir("cal");
  REQUIRE(run_cli("gen --out " + dir.str("m.jsonl") + " --count 6 --quiet") == 0);
  REQUIRE(run_cli("calibrate --manifest " + dir.str("m.jsonl") + " --out " +
                  dir.str("stats.json") + " --quiet") == 0);
  const std::string first = read_bytes(dir.path / "stats.json");
  CHECK_FALSE(first.empty());
  // Parses as JSON with the calibration's top-level shape.
  nlohmann::json j = nlohmann::json::parse(first);
  CHECK(j.contains("mean"));
  CHECK(j.contains("cov"));
  CHECK(j.contains("thresholds"));

  REQUIRE(run_cli("calibrate --manifest " + dir.str("m.jsonl") + " --out " +
                  dir.str("stats.json") + " --quiet") == 0);
  CHECK(read_bytes(dir.path / "stats.json") == first);
}

TEST_CASE("calibrate refuses a manifest with a single clean record") {
  TempDir dir("cal1");
  REQUIRE(run_cli("gen --out " + dir.str("m.jsonl") + " --count 1 --quiet") == 0);
  CHECK(run_cli("calibrate --manifest " + dir.str("m.jsonl") + " --out " +
                dir.str("stats.json") + " --quiet") == 3);
}

TEST_CASE("missing inputs exit with the io code") {
  TempDir dir("io");
  CHECK(run_cli("calibrate --manifest " + dir.str("absent.jsonl") + " --out " +
                dir.str("stats.json") + " --quiet") == 2);
  CHECK(run_cli("detect --manifest " + dir.str("absent.jsonl") + " --stats " +
                dir.str("absent.json") + " --out " + dir.str("r.jsonl") +
                " --quiet") == 2);
}

TEST_CASE("invalid flag values exit with the validation code") {
  TempDir dir("val");
  CHECK(run_cli("experiment --out " + dir.str("r.json") +
                " --seeds 1 --lr 0 --quiet") == 3);
  CHECK(run_cli("experiment --out " + dir.str("r.json") +
                " --seeds 1 --eval-size 0 --quiet") == 3);
  CHECK(run_cli("gen --out " + dir.str("m.jsonl") + " --split test --quiet") ==
        3);
}

TEST_CASE("perturb doubles the record count and reruns byte-identically") {
  TempDir dir("pert");
  REQUIRE(run_cli("gen --out " + dir.str("m.jsonl") + " --count 5 --quiet") == 0);
  REQUIRE(run_cli("perturb --in " + dir.str("m.jsonl") + " --out " +
                  dir.str("p.jsonl") + " --seed 9 --quiet") == 0);
  CHECK(line_count(dir.path / "p.jsonl") == 10);

  const std::string manifest_first = read_bytes(dir.path / "p.jsonl");
  const std::string images_first = tree_fingerprint(dir.path / "p_images");
  REQUIRE(run_cli("perturb --in " + dir.str("m.jsonl") + " --out " +
                  dir.str("p.jsonl") + " --seed 9 --quiet") == 0);
  CHECK(read_bytes(dir.path / "p.jsonl") == manifest_first);
  CHECK(tree_fingerprint(dir.path / "p_images") == images_first);

  // A different seed must change the perturbed outputs.
  REQUIRE(run_cli("perturb --in " + dir.str("m.jsonl") + " --out " +
                  dir.str("q.jsonl") + " --seed 10 --quiet") == 0);
  CHECK(read_bytes(dir.path / "q.jsonl") != manifest_first);
}

TEST_CASE("detect writes one line per record plus a summary") {
  TempDir dir("det");
  REQUIRE(run_cli("gen --out " + dir.str("m.jsonl") + " --count 6 --quiet") == 0);
  REQUIRE(run_cli("calibrate --manifest " + dir.str("m.jsonl") + " --out " +
                  dir.str("stats.json") + " --quiet") == 0);
  REQUIRE(run_cli("perturb --in " + dir.str("m.jsonl") + " --out " +
                  dir.str("p.jsonl") + " --seed 3 --quiet") == 0);
  REQUIRE(run_cli("detect --manifest " + dir.str("p.jsonl") + " --stats " +
                  dir.str("stats.json") + " --out " + dir.str("report.jsonl") +
                  " --quiet") == 0);
  CHECK(line_count(dir.path / "report.jsonl") == 13);  // 12 records + summary

  // Every record line carries the metric fields; the last is the summary.
  std::ifstream in(dir.path / "report.jsonl");
  std::string line;
  std::size_t record_lines = 0;
  bool saw_summary = false;
  while (std::getline(in, line)) {
    nlohmann::json j = nlohmann::json::parse(line);
    if (j.contains("summary")) {
      saw_summary = true;
      CHECK(j["summary"].contains("tpr"));  // specs present => truth known
      CHECK(j["summary"].contains("fpr"));
    } else {
      ++record_lines;
      CHECK(j.contains("image_path"));
      CHECK(j.contains("mahal"));
      CHECK(j.contains("hf"));
      CHECK(j.contains("entstd"));
      CHECK(j.contains("flags"));
      CHECK(j.contains("cue"));
      CHECK(j.contains("explanation"));
    }
  }
  CHECK(record_lines == 12);
  CHECK(saw_summary);
}

TEST_CASE("detect summary reflects what the manifest annotates") {
  TempDir dir("ann");
  REQUIRE(run_cli("gen --out " + dir.str("m.jsonl") + " --count 3 --quiet") == 0);
  REQUIRE(run_cli("calibrate --manifest " + dir.str("m.jsonl") + " --out " +
                  dir.str("stats.json") + " --quiet") == 0);

  // Known-clean manifest: FPR is reported (and small), TPR has no positives.
  REQUIRE(run_cli("detect --manifest " + dir.str("m.jsonl") + " --stats " +
                  dir.str("stats.json") + " --out " + dir.str("rc.jsonl") +
                  " --quiet") == 0);
  {
    std::ifstream in(dir.path / "rc.jsonl");
    std::string line;
    while (std::getline(in, line)) {
      nlohmann::json j = nlohmann::json::parse(line);
      if (j.contains("summary")) {
        CHECK_FALSE(j["summary"].contains("tpr"));
        REQUIRE(j["summary"].contains("fpr"));
        for (const auto& [flag, rate] : j["summary"]["fpr"].items())
          CHECK(rate.get<double>() <= 0.03);
      } else {
        REQUIRE(j.contains("truth_class"));
        CHECK(j["truth_class"].get<int>() == 0);
      }
    }
  }

  // Stripping the annotations removes the truth: no TPR/FPR in the summary.
  {
    std::ifstream in(dir.path / "m.jsonl");
    std::ofstream out(dir.path / "u.jsonl");
    std::string line;
    while (std::getline(in, line)) {
      nlohmann::json j = nlohmann::json::parse(line);
      j.erase("spec");
      out << j.dump() << "\n";
    }
  }
  REQUIRE(run_cli("detect --manifest " + dir.str("u.jsonl") + " --stats " +
                  dir.str("stats.json") + " --out " + dir.str("ru.jsonl") +
                  " --quiet") == 0);
  {
    std::ifstream in(dir.path / "ru.jsonl");
    std::string line;
    while (std::getline(in, line)) {
      nlohmann::json j = nlohmann::json::parse(line);
      if (j.contains("summary")) {
        CHECK_FALSE(j["summary"].contains("tpr"));
        CHECK_FALSE(j["summary"].contains("fpr"));
      } else {
        CHECK_FALSE(j.contains("truth_class"));
      }
    }
  }

  // The stripped manifest still calibrates: the caller vouches for it.
  CHECK(run_cli("calibrate --manifest " + dir.str("u.jsonl") + " --out " +
                dir.str("stats2.json") + " --quiet") == 0);
}

TEST_CASE("explain prints a json report for a single image") {
  TempDir dir("expl");
  REQUIRE(run_cli("gen --out " + dir.str("m.jsonl") + " --count 4 --quiet") == 0);
  REQUIRE(run_cli("calibrate --manifest " + dir.str("m.jsonl") + " --out " +
                  dir.str("stats.json") + " --quiet") == 0);
  const std::string image =
      (dir.path / "m_images" / "scene_000000.png").string();
  REQUIRE(fs::exists(image));
  const std::string out = dir.str("explain.json");
  const std::string cmd = std::string("\"") + cli_path() + "\" explain --image " +
                          image + " --stats " + dir.str("stats.json") + " > " +
                          out + " 2>/dev/null";
  REQUIRE(std::system(cmd.c_str()) == 0);
  nlohmann::json j = nlohmann::json::parse(read_bytes(out));
  CHECK(j.contains("cue"));
  CHECK(j.contains("explanation"));
  CHECK(j.contains("flags"));
}

TEST_CASE("experiment reports are reproducible and thread-count independent") {
  TempDir dir("exp");
  const std::string flags = "experiment --out " + dir.str("r.json") +
                            " --seeds 1 --train-size 48 --eval-size 12 "
                            "--epochs 3 --batch 8 --hidden 8 --quiet";
  REQUIRE(run_cli(flags, "EVIDENCE3_THREADS=1") == 0);
  const std::string serial = read_bytes(dir.path / "r.json");
  REQUIRE(run_cli(flags, "EVIDENCE3_THREADS=1") == 0);
  CHECK(read_bytes(dir.path / "r.json") == serial);
  REQUIRE(run_cli(flags, "EVIDENCE3_THREADS=8") == 0);
  CHECK(read_bytes(dir.path / "r.json") == serial);
}

TEST_CASE("experiment flags override config-file values") {
  TempDir dir("cfg");
  {
    std::ofstream cfg(dir.path / "config.json");
    cfg << R"({"train": {"epochs": 5, "lr": 0.25}})";
  }
  REQUIRE(run_cli("experiment --out " + dir.str("r.json") + " --config " +
                  dir.str("config.json") +
                  " --seeds 1 --train-size 48 --eval-size 12 --epochs 2 "
                  "--batch 8 --hidden 8 --quiet") == 0);
  nlohmann::json j = nlohmann::json::parse(read_bytes(dir.path / "r.json"));
  CHECK(j["config"]["train"]["epochs"] == 2);    // flag wins
  CHECK(j["config"]["train"]["lr"] == 0.25);     // config file value survives
  CHECK(j["seeds"] == nlohmann::json::array({1}));
  CHECK(j["modes"].contains("default"));
  CHECK(j["modes"].contains("augmented"));
  CHECK(j["modes"].contains("proposed"));
  CHECK(j["per_seed"].size() == 1);
  CHECK(j["modes"]["proposed"].contains("xai_acc"));
  CHECK(j["modes"]["default"]["xai_acc"].is_null());
}

TEST_CASE("malformed config files exit with the validation code") {
  TempDir dir("badcfg");
  {
    std::ofstream cfg(dir.path / "config.json");
    cfg << "{not json";
  }
  CHECK(run_cli("experiment --out " + dir.str("r.json") + " --config " +
                dir.str("config.json") + " --quiet") == 3);
}

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "cgrl/pipeline.hpp"
#include "doctest.h"
#include "oracle/oracle.hpp"
#include "temp_dir.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CGRL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Three archetypes, no class offset: every archetype forms one consistent group.
cgrl::PipelineConfig three_archetype_config(const fs::path& dir) {
  cgrl::PipelineConfig c;
  c.output_dir = dir;
  c.ingest.synthetic = cgrl::three_archetype_synthetic_spec(42);
  c.ingest.synthetic.timesteps = 16;
  c.ingest.synthetic.channels = 3;
  c.ingest.synthetic.windows_per_cell = 30;
  c.ingest.synthetic.class_mean_shift = 0.0;
  c.autoencoder.epochs = 20;
  c.autoencoder.batch_size = 16;
  c.classifier.epochs = 100;
  return c;
}

cgrl::PipelineConfig small_config(const fs::path& dir) {
  cgrl::PipelineConfig c = three_archetype_config(dir);
  c.ingest.synthetic.windows_per_cell = 12;
  c.autoencoder.epochs = 3;
  return c;
}

std::map<std::string, std::string> digests(const fs::path& run) {
  const auto m = cgrl::Json::parse(slurp(run / cgrl::run_files::kManifest));
  std::map<std::string, std::string> out;
  for (const auto& [stage, body] : m.at("stages").items())
    for (const auto& a : body.at("artifacts")) out[a.at("path").get<std::string>()] = a.at("sha256").get<std::string>();
  return out;
}

}  // namespace

TEST_CASE("config: unknown keys and bad JSON are configuration errors") {
  TempDir tmp("cli");
  std::ofstream(tmp.path() / "bad_key.json") << R"({"output_dir": "x", "autoencoder": {"hiden1": 4}})";
  CHECK_THROWS_AS(cgrl::load_config(tmp.path() / "bad_key.json"), cgrl::ConfigError);
  std::ofstream(tmp.path() / "bad_top.json") << R"({"colour": "red"})";
  CHECK_THROWS_AS(cgrl::load_config(tmp.path() / "bad_top.json"), cgrl::ConfigError);
  std::ofstream(tmp.path() / "bad_json.json") << "{";
  CHECK_THROWS_AS(cgrl::load_config(tmp.path() / "bad_json.json"), cgrl::ConfigError);
  std::ofstream(tmp.path() / "bad_type.json") << R"({"cgf": {"tau": "small"}})";
  CHECK_THROWS_AS(cgrl::load_config(tmp.path() / "bad_type.json"), cgrl::ConfigError);
  std::ofstream(tmp.path() / "bad_range.json") << R"({"cgf": {"tau": 1.5}})";
  CHECK_THROWS_AS(cgrl::load_config(tmp.path() / "bad_range.json"), cgrl::ConfigError);
  CHECK(run_cli("train -c " + (tmp.path() / "bad_key.json").string()) == cgrl::kExitConfig);
}

TEST_CASE("config: JSON round trip") {
  cgrl::PipelineConfig c = small_config("somewhere");
  c.cgf.tau = 0.07;
  c.cgf.k_max = 9;
  c.mapping = cgrl::MappingMethod::CrCr;
  const auto back = cgrl::PipelineConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.cgf.k_max == std::optional<std::size_t>(9));
  CHECK(back.ingest.synthetic.class_mean_shift == 0.0);
}

TEST_CASE("ingest: a missing corpus root is an IO error") {
  TempDir tmp("cli");
  cgrl::PipelineConfig c;
  c.output_dir = tmp.path() / "run";
  c.ingest.source = cgrl::DatasetSource::Uah;
  c.ingest.root = tmp.path() / "no_such_root";
  CHECK_THROWS_AS(cgrl::cmd_ingest(c), cgrl::IoError);
  CHECK(run_cli("ingest -o " + (tmp.path() / "run2").string() + " --dataset-root " + c.ingest.root.string()) ==
        cgrl::kExitIo);
}

TEST_CASE("ingest: a UAH-style tree gives 64x6 windows over three classes") {
  TempDir tmp("cli");
  const char* names[] = {"a-D1-NORMAL-MOTORWAY", "b-D1-AGGRESSIVE-MOTORWAY", "c-D1-DROWSY-MOTORWAY",
                         "d-D2-NORMAL-MOTORWAY", "e-D2-AGGRESSIVE-MOTORWAY", "f-D2-DROWSY-MOTORWAY",
                         "g-D2-DROWSY-SECONDARY"};
  cgrl::Rng rng(1);
  for (const char* n : names) {
    fs::create_directories(tmp.path() / "root" / n);
    std::ofstream out(tmp.path() / "root" / n / "RAW_ACCELEROMETERS.txt");
    for (int r = 0; r < 200; ++r) {
      out << 0.1 * r << " 1";
      for (int c = 0; c < 9; ++c) out << ' ' << rng.normal();
      out << '\n';
    }
  }
  cgrl::PipelineConfig c;
  c.output_dir = tmp.path() / "run";
  c.ingest.source = cgrl::DatasetSource::Uah;
  c.ingest.root = tmp.path() / "root";
  const auto s = cgrl::cmd_ingest(c);
  CHECK(s.timesteps == 64);
  CHECK(s.channels == 6);
  CHECK(s.classes == 3);
  CHECK(s.train_windows + s.test_windows == 6 * 5);  // motorway only; starts 0,32,...,128
  const auto [train, stats] = cgrl::load_dataset(c.output_dir / cgrl::run_files::kTrainData);
  CHECK(stats.has_value());
  CHECK(train.class_names == cgrl::behavior_class_names());
  CHECK(fs::exists(c.output_dir / cgrl::run_files::kParseReport));
}

TEST_CASE("full run on three archetypes") {
  TempDir tmp("cli");
  const auto cfg = three_archetype_config(tmp.path() / "run");
  const fs::path run = cfg.output_dir;

  const auto ing = cgrl::cmd_ingest(cfg);
  CHECK(ing.train_windows == 216);
  CHECK(ing.test_windows == 54);
  CHECK(fs::exists(run / cgrl::run_files::kArchetypes));

  const auto tr = cgrl::cmd_train(cfg);
  CHECK(tr.groups == 3);
  const auto cgf = cgrl::Json::parse(slurp(run / cgrl::run_files::kTrainCgf));
  CHECK(cgf.at("K") == 3);

  // groups coincide with the hidden archetypes
  std::vector<int> arch;
  for (const auto& row : read_csv(run / cgrl::run_files::kArchetypes))
    if (row[0] == "train") arch.push_back(std::stoi(row[2]));
  CHECK(oracle::adjusted_rand_index(cgf.at("assignment").get<std::vector<int>>(), arch) == 1.0);

  const auto inf = cgrl::cmd_infer(cfg);
  REQUIRE(inf.grouped.has_value());
  REQUIRE(inf.baseline.has_value());
  CHECK(inf.grouped_cr_cr.has_value());
  CHECK(inf.grouped_avg.has_value());
  CHECK(read_csv(run / cgrl::run_files::kPredictions).size() == 54);
  const auto metrics = cgrl::Json::parse(slurp(run / cgrl::run_files::kMetrics));
  CHECK(metrics.contains("grouped"));
  CHECK(metrics.contains("baseline"));
  CHECK(metrics.contains("delta"));
  const auto mapping = cgrl::Json::parse(slurp(run / cgrl::run_files::kMappingReport));
  CHECK(mapping.contains("configured_method"));

  const auto rep = cgrl::cmd_report(run);
  CHECK_FALSE(rep.files.empty());
  std::map<int, std::size_t> composed;
  for (const auto& row : read_csv(run / "report/composition_train.csv")) composed[std::stoi(row[0])] += std::stoul(row.back());
  const auto sizes = cgf.at("group_sizes").get<std::vector<std::size_t>>();
  REQUIRE(composed.size() == sizes.size());
  for (std::size_t g = 0; g < sizes.size(); ++g) CHECK(composed[static_cast<int>(g)] == sizes[g]);
  CHECK(read_csv(run / "report/pca_train.csv").size() == 216);
  CHECK(read_csv(run / "report/pca_test.csv").size() == 54);
  CHECK(fs::exists(run / "report/hubert.csv"));
  CHECK_NOTHROW(cgrl::verify_stage_digests(run, "train"));
  CHECK_FALSE(fs::exists(run / cgrl::run_files::kLock));
}

TEST_CASE("baseline only skips group formation") {
  TempDir tmp("cli");
  const auto cfg = small_config(tmp.path() / "run");
  cgrl::cmd_ingest(cfg);
  const auto tr = cgrl::cmd_train(cfg, true);
  CHECK(tr.baseline_only);
  CHECK_FALSE(fs::exists(cfg.output_dir / cgrl::run_files::kTrainCgf));
  CHECK_FALSE(fs::exists(cfg.output_dir / cgrl::run_files::kBundle));
  CHECK(fs::exists(cfg.output_dir / cgrl::run_files::kBaseline));
}

TEST_CASE("reruns with the same seed reproduce every digest") {
  TempDir tmp("cli");
  std::map<std::string, std::string> first;
  for (int pass = 0; pass < 2; ++pass) {
    const auto cfg = small_config(tmp.path() / ("run" + std::to_string(pass)));
    cgrl::cmd_ingest(cfg);
    cgrl::cmd_train(cfg);
    cgrl::cmd_infer(cfg);
    const auto d = digests(cfg.output_dir);
    CHECK(d.size() > 10);
    if (pass == 0) {
      first = d;
    } else {
      CHECK(d == first);
    }
  }
}

TEST_CASE("tampered artifacts are detected") {
  TempDir tmp("cli");
  const auto cfg = small_config(tmp.path() / "run");
  cgrl::cmd_ingest(cfg);
  cgrl::cmd_train(cfg);
  std::ofstream(cfg.output_dir / cgrl::run_files::kTrainCgf, std::ios::app) << " ";
  CHECK_THROWS_AS(cgrl::verify_stage_digests(cfg.output_dir, "train"), cgrl::IoError);
  CHECK_THROWS_AS(cgrl::cmd_infer(cfg), cgrl::IoError);
}

TEST_CASE("a held lock refuses a second writer") {
  TempDir tmp("cli");
  const auto cfg = small_config(tmp.path() / "run");
  cgrl::cmd_ingest(cfg);
  std::ofstream(cfg.output_dir / cgrl::run_files::kLock) << "other";
  CHECK_THROWS_AS(cgrl::cmd_train(cfg), cgrl::IoError);
}

TEST_CASE("unlabeled test data yields predictions without metrics") {
  TempDir tmp("cli");
  const auto cfg = small_config(tmp.path() / "run");
  cgrl::cmd_ingest(cfg);
  cgrl::cmd_train(cfg);
  const fs::path test_path = cfg.output_dir / cgrl::run_files::kTestData;
  auto [test, stats] = cgrl::load_dataset(test_path);
  test.labeled = false;
  cgrl::save_dataset(test_path, test, stats);

  const auto inf = cgrl::cmd_infer(cfg);
  CHECK_FALSE(inf.grouped.has_value());
  CHECK_FALSE(inf.baseline.has_value());
  CHECK_FALSE(fs::exists(cfg.output_dir / cgrl::run_files::kMetrics));
  const auto preds = read_csv(cfg.output_dir / cgrl::run_files::kPredictions);
  REQUIRE(preds.size() == test.size());
  CHECK(preds[0].size() >= 3);
  CHECK(preds[0][2].empty());
}

TEST_CASE("report skips composition without metadata") {
  TempDir tmp("cli");
  const auto cfg = small_config(tmp.path() / "run");
  cgrl::cmd_ingest(cfg);
  cgrl::cmd_train(cfg);
  cgrl::cmd_infer(cfg);
  const fs::path test_path = cfg.output_dir / cgrl::run_files::kTestData;
  auto [test, stats] = cgrl::load_dataset(test_path);
  test.meta.clear();
  cgrl::save_dataset(test_path, test, stats);
  cgrl::cmd_report(cfg.output_dir);
  CHECK(fs::exists(cfg.output_dir / "report/composition_train.csv"));
  CHECK_FALSE(fs::exists(cfg.output_dir / "report/composition_test.csv"));
  CHECK(fs::exists(cfg.output_dir / "report/pca_test.csv"));
}

TEST_CASE("report on a directory without a run") {
  TempDir tmp("cli");
  CHECK_THROWS_AS(cgrl::cmd_report(tmp.path()), cgrl::IoError);
}

TEST_CASE("pca coordinates") {
  cgrl::Matrix pts(4, 3);
  pts.data = {1, 0, 0, -1, 0, 0, 0, 0.5, 0, 0, -0.5, 0};
  const auto c = cgrl::pca_2d(pts);
  REQUIRE(c.rows == 4);
  REQUIRE(c.cols == 2);
  CHECK(std::abs(c(0, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(c(2, 1)) == doctest::Approx(0.5));
  CHECK(c(2, 0) == doctest::Approx(0.0));
}

TEST_CASE("command line without a subcommand fails") {
  CHECK(run_cli("") != 0);
  CHECK(run_cli("--help") == 0);
}

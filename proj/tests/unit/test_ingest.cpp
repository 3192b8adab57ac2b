#include <fstream>
#include <set>

#include "cgrl/ingest.hpp"
#include "doctest.h"
#include "temp_dir.hpp"

namespace fs = std::filesystem;

namespace {

// Timestamp, flag, raw xyz, filtered xyz, roll, pitch, yaw.
std::string raw_row(double ts, double base) {
  std::string row = std::to_string(ts) + " 1";
  for (int c = 0; c < 9; ++c) row += " " + std::to_string(base + c);
  return row + "\n";
}

fs::path write_session(const fs::path& root, const std::string& name, const std::string& body) {
  const fs::path dir = root / name;
  fs::create_directories(dir);
  std::ofstream(dir / "RAW_ACCELEROMETERS.txt") << body;
  return dir;
}

cgrl::RawSession ramp_session(std::size_t n, const std::string& id) {
  cgrl::RawSession s;
  s.driver_id = "D1";
  s.session_id = id;
  for (std::size_t i = 0; i < n; ++i) {
    cgrl::ImuSample x;
    x.timestamp = static_cast<double>(i);
    x.values.fill(static_cast<double>(i));
    s.samples.push_back(x);
  }
  return s;
}

}  // namespace

TEST_CASE("parse: three well-formed rows keep file order") {
  TempDir tmp("ingest");
  const auto dir = write_session(tmp.path(), "20151110175712-16km-D1-NORMAL1-MOTORWAY",
                                 raw_row(0.1, 10) + raw_row(0.2, 20) + raw_row(0.3, 30));
  const auto s = cgrl::parse_uah_session(dir);
  REQUIRE(s.samples.size() == 3);
  CHECK(s.rejected_rows == 0);
  CHECK(s.driver_id == "D1");
  CHECK(s.behavior == cgrl::Behavior::Normal);
  CHECK(s.road == cgrl::Road::Motorway);
  for (std::size_t i = 0; i < 3; ++i) {
    const double base = 10.0 * static_cast<double>(i + 1);
    CHECK(s.samples[i].timestamp == doctest::Approx(0.1 * static_cast<double>(i + 1)));
    // channels are file columns 5..10 = base + 3 .. base + 8
    for (std::size_t c = 0; c < cgrl::kImuChannels; ++c) CHECK(s.samples[i].values[c] == base + 3.0 + c);
  }
}

TEST_CASE("parse: behavior and road tokens") {
  TempDir tmp("ingest");
  const auto body = raw_row(1, 0);
  CHECK(cgrl::parse_uah_session(write_session(tmp.path(), "x-D2-AGGRESSIVE-SECONDARY", body)).behavior ==
        cgrl::Behavior::Aggressive);
  const auto s = cgrl::parse_uah_session(write_session(tmp.path(), "x-D3-DROWSY-SECONDARY", body));
  CHECK(s.behavior == cgrl::Behavior::Drowsy);
  CHECK(s.road == cgrl::Road::Secondary);
  CHECK_THROWS_AS(cgrl::parse_uah_session(write_session(tmp.path(), "x-D3-SLEEPY-SECONDARY", body)),
                  cgrl::ConfigError);
  CHECK_THROWS_AS(cgrl::parse_uah_session(write_session(tmp.path(), "x-D3-NORMAL-HIGHWAY", body)), cgrl::ConfigError);
}

TEST_CASE("parse: one corrupt row among 100") {
  TempDir tmp("ingest");
  std::string body;
  for (int i = 0; i < 100; ++i) body += i == 41 ? std::string("0.5 1 2 3 4 abc 6 7 8 9 10\n") : raw_row(i, i);
  const auto s = cgrl::parse_uah_session(write_session(tmp.path(), "a-D1-NORMAL-MOTORWAY", body));
  CHECK(s.samples.size() == 99);
  CHECK(s.rejected_rows == 1);
}

TEST_CASE("parse: short and out-of-order rows are rejected") {
  TempDir tmp("ingest");
  const std::string body = raw_row(1, 0) + "2 1 2 3\n" + raw_row(0.5, 0) + raw_row(3, 0);
  const auto s = cgrl::parse_uah_session(write_session(tmp.path(), "a-D1-NORMAL-MOTORWAY", body));
  CHECK(s.samples.size() == 2);
  CHECK(s.rejected_rows == 2);
}

TEST_CASE("parse: missing file and empty file are IO errors") {
  TempDir tmp("ingest");
  fs::create_directories(tmp.path() / "a-D1-NORMAL-MOTORWAY");
  CHECK_THROWS_AS(cgrl::parse_uah_session(tmp.path() / "a-D1-NORMAL-MOTORWAY"), cgrl::IoError);
  CHECK_THROWS_AS(cgrl::parse_uah_session(write_session(tmp.path(), "b-D1-NORMAL-MOTORWAY", "junk\n")),
                  cgrl::IoError);
}

TEST_CASE("corpus: road filter and sorted order") {
  TempDir tmp("ingest");
  std::string body;
  for (int i = 0; i < 70; ++i) body += raw_row(i, 0);
  write_session(tmp.path() / "D2", "b-D2-DROWSY-MOTORWAY", body);
  write_session(tmp.path() / "D1", "a-D1-NORMAL-MOTORWAY", body);
  write_session(tmp.path() / "D1", "c-D1-NORMAL-SECONDARY", body);
  cgrl::CorpusReport report;
  const auto all = cgrl::parse_uah_corpus(tmp.path(), {}, std::nullopt, report);
  CHECK(report.sessions_found == 3);
  REQUIRE(all.size() == 3);
  CHECK(all[0].session_id == "a-D1-NORMAL-MOTORWAY");
  const auto motorway = cgrl::parse_uah_corpus(tmp.path(), {}, cgrl::Road::Motorway, report);
  CHECK(motorway.size() == 2);
  CHECK_THROWS_AS(cgrl::parse_uah_corpus(tmp.path() / "nope", {}, std::nullopt, report), cgrl::IoError);
}

TEST_CASE("windowing: 160 samples give starts 0, 32, 64, 96") {
  const auto ds = cgrl::window_sessions({ramp_session(160, "s")}, 64, 0.5);
  REQUIRE(ds.size() == 4);
  CHECK(ds.timesteps == 64);
  CHECK(ds.channels == 6);
  for (std::size_t w = 0; w < 4; ++w) CHECK(ds.window(w)[0] == 32.0 * static_cast<double>(w));
}

TEST_CASE("windowing: exactly one window") {
  CHECK(cgrl::window_sessions({ramp_session(64, "s")}).size() == 1);
}

TEST_CASE("windowing: windows never cross sessions") {
  const auto ds = cgrl::window_sessions({ramp_session(96, "a"), ramp_session(96, "b")}, 64, 0.5);
  REQUIRE(ds.size() == 4);
  const double starts[] = {0, 32, 0, 32};
  const char* ids[] = {"a", "a", "b", "b"};
  for (std::size_t w = 0; w < 4; ++w) {
    CHECK(ds.window(w)[0] == starts[w]);
    CHECK(ds.window(w)[ds.window_stride() - 1] == starts[w] + 63.0);
    CHECK(ds.meta[w].session_id == ids[w]);
  }
}

TEST_CASE("windowing: short sessions are skipped with a warning") {
  std::vector<std::string> warnings;
  const auto ds = cgrl::window_sessions({ramp_session(63, "s")}, 64, 0.5, &warnings);
  CHECK(ds.size() == 0);
  CHECK(warnings.size() == 1);
  CHECK_THROWS(cgrl::window_stride_for(64, 1.0));
}

TEST_CASE("split: 18 strata of 100 windows") {
  cgrl::WindowedDataset ds;
  ds.timesteps = 2;
  ds.channels = 1;
  ds.class_names = cgrl::behavior_class_names();
  for (int driver = 0; driver < 6; ++driver)
    for (int b = 0; b < 3; ++b)
      for (int i = 0; i < 100; ++i) {
        ds.values.insert(ds.values.end(), {static_cast<double>(ds.size()), 0.0});
        ds.labels.push_back(b);
        ds.meta.push_back({"D" + std::to_string(driver), std::string(cgrl::to_string(cgrl::Behavior(b))), "MOTORWAY", ""});
      }
  const auto split = cgrl::stratified_split_indices(ds, 0.8, 42);
  CHECK(split.train.size() == 1440);
  CHECK(split.test.size() == 360);

  std::map<std::string, std::size_t> per_stratum;
  for (std::size_t i : split.test) per_stratum[ds.meta[i].driver_id + ds.meta[i].behavior]++;
  CHECK(per_stratum.size() == 18);
  for (const auto& [key, n] : per_stratum) CHECK(n == 20);

  // disjoint cover
  std::set<std::size_t> all(split.train.begin(), split.train.end());
  for (std::size_t i : split.test) CHECK(all.insert(i).second);
  CHECK(all.size() == ds.size());

  const auto again = cgrl::stratified_split_indices(ds, 0.8, 42);
  CHECK(again.train == split.train);
  const auto other = cgrl::stratified_split_indices(ds, 0.8, 43);
  CHECK(other.train != split.train);

  const auto [train, test] = cgrl::stratified_split(ds, 0.8, 42);
  CHECK(train.size() == 1440);
  CHECK(test.window(0)[0] == static_cast<double>(split.test[0]));
}

TEST_CASE("split: singleton strata go to train") {
  cgrl::WindowedDataset ds;
  ds.timesteps = 1;
  ds.channels = 1;
  ds.class_names = {"A", "B"};
  ds.values = {0, 1, 2};
  ds.labels = {0, 0, 1};
  const auto split = cgrl::stratified_split_indices(ds, 0.8, 1);
  CHECK(split.train.size() == 2);
  CHECK(split.test.size() == 1);
  CHECK(std::find(split.train.begin(), split.train.end(), 2u) != split.train.end());
}

TEST_CASE("normalization: train statistics applied") {
  cgrl::WindowedDataset ds;
  ds.timesteps = 2;
  ds.channels = 2;
  ds.class_names = {"A"};
  ds.values = {1, 5, 3, 5};
  ds.labels = {0};
  const auto stats = cgrl::fit_normalization(ds);
  CHECK(stats.mean == std::vector<double>{2.0, 5.0});
  CHECK(stats.stddev == std::vector<double>{1.0, 1.0});  // constant channel falls back to 1
  cgrl::apply_normalization(ds, stats);
  CHECK(ds.values == std::vector<double>{-1, 0, 1, 0});
}

TEST_CASE("synthetic: counts and balanced archetypes") {
  const auto syn = cgrl::generate_synthetic(cgrl::three_archetype_synthetic_spec(42));
  CHECK(syn.data.size() == 450);
  CHECK(syn.data.timesteps == 64);
  CHECK(syn.data.channels == 6);
  std::map<int, int> counts;
  for (int a : syn.archetype) counts[a]++;
  CHECK(counts == std::map<int, int>{{0, 150}, {1, 150}, {2, 150}});
  CHECK_NOTHROW(syn.data.validate());
}

TEST_CASE("synthetic: zero noise makes each cell constant") {
  auto spec = cgrl::three_archetype_synthetic_spec(3);
  for (auto& a : spec.archetypes) a.noise_sigma = 0.0;
  spec.windows_per_cell = 4;
  const auto syn = cgrl::generate_synthetic(spec);
  for (std::size_t i = 0; i < syn.data.size(); i += 4)
    for (std::size_t j = 1; j < 4; ++j) {
      const auto a = syn.data.window(i), b = syn.data.window(i + j);
      CHECK(std::equal(a.begin(), a.end(), b.begin()));
    }
}

TEST_CASE("synthetic: same seed, same data") {
  const auto spec = cgrl::xor_synthetic_spec(9);
  CHECK(cgrl::generate_synthetic(spec).data == cgrl::generate_synthetic(spec).data);
  auto bad = spec;
  bad.archetypes.clear();
  CHECK_THROWS_AS(cgrl::generate_synthetic(bad), cgrl::ConfigError);
}

TEST_CASE("dataset archive round trip is bit exact") {
  TempDir tmp("ingest");
  auto ds = cgrl::generate_synthetic(cgrl::xor_synthetic_spec(1)).data;
  ds.values[3] = 0.1 + 0.2;  // not representable in short decimal form
  const cgrl::NormalizationStats stats{{0.1, 0.2, 0.3}, {1.0 / 3.0, 1.0, 2.0}};
  cgrl::save_dataset(tmp.path() / "ds.bin", ds, stats);
  const auto [back, back_stats] = cgrl::load_dataset(tmp.path() / "ds.bin");
  CHECK(back == ds);
  REQUIRE(back_stats.has_value());
  CHECK(*back_stats == stats);

  cgrl::save_dataset(tmp.path() / "plain.bin", ds, std::nullopt);
  CHECK_FALSE(cgrl::load_dataset(tmp.path() / "plain.bin").second.has_value());
  CHECK_THROWS_AS(cgrl::load_dataset(tmp.path() / "missing.bin"), cgrl::IoError);
  std::ofstream(tmp.path() / "garbage.bin") << "not an archive";
  CHECK_THROWS_AS(cgrl::load_dataset(tmp.path() / "garbage.bin"), cgrl::IoError);
}

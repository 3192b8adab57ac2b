#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cgrl/autoenc.hpp"
#include "cgrl/cgf.hpp"
#include "cgrl/container.hpp"
#include "cgrl/grouplearn.hpp"
#include "cgrl/ingest.hpp"
#include "cgrl/mapping.hpp"

namespace cgrl {

enum class DatasetSource { Uah, Synthetic };

struct IngestOptions {
  DatasetSource source = DatasetSource::Synthetic;
  std::filesystem::path root;             // UAH corpus root
  std::optional<Road> road = Road::Motorway;  // nullopt keeps every road
  ColumnMap columns;
  std::size_t window_length = 64;
  double overlap = 0.5;
  double train_fraction = 0.8;
  std::uint64_t seed = 42;
  SyntheticSpec synthetic = three_archetype_synthetic_spec(42);
};

/// Full run configuration. Stored as JSON; unknown keys are rejected.
struct PipelineConfig {
  std::filesystem::path output_dir = "run";
  IngestOptions ingest;
  AutoencoderConfig autoencoder;
  CgfConfig cgf;
  ClassifierSpec classifier;
  MappingMethod mapping = MappingMethod::Avg;
  bool train_baseline = true;

  void validate() const;
  Json to_json() const;
  static PipelineConfig from_json(const Json& j);
};

PipelineConfig load_config(const std::filesystem::path& path);

// Process exit codes per failure class.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitIo = 3,
  kExitDivergence = 4,
};

// Run directory layout, relative to PipelineConfig::output_dir.
namespace run_files {
inline constexpr const char* kTrainData = "data/train.cgds";
inline constexpr const char* kTestData = "data/test.cgds";
inline constexpr const char* kParseReport = "data/parse_report.json";
inline constexpr const char* kArchetypes = "data/archetypes.csv";
inline constexpr const char* kModel = "model/autoencoder.cgae";
inline constexpr const char* kTrainReport = "model/train_report.json";
inline constexpr const char* kTrainAecs = "model/train_aecs.cgmx";
inline constexpr const char* kTrainCgf = "model/cgf_train.json";
inline constexpr const char* kBundle = "model/bundle.cgbn";
inline constexpr const char* kBaseline = "model/baseline.cgbn";
inline constexpr const char* kTestAecs = "infer/test_aecs.cgmx";
inline constexpr const char* kTestCgf = "infer/cgf_test.json";
inline constexpr const char* kMappingReport = "infer/mapping_report.json";
inline constexpr const char* kPredictions = "infer/predictions.csv";
inline constexpr const char* kBaselinePredictions = "infer/predictions_baseline.csv";
inline constexpr const char* kMetrics = "infer/metrics.json";
inline constexpr const char* kManifest = "run_manifest.json";
inline constexpr const char* kLock = ".lock";
}  // namespace run_files

void save_aecs(const std::filesystem::path& path, const AecsMatrix& aecs);
AecsMatrix load_aecs(const std::filesystem::path& path);

Json cgf_result_to_json(const CgfResult& r, double tau);
Json mapping_report_to_json(const MappingReport& r);
Json metrics_to_json(const ClassMetrics& m, const std::vector<std::string>& class_names);

struct IngestSummary {
  std::size_t train_windows = 0;
  std::size_t test_windows = 0;
  std::size_t timesteps = 0;
  std::size_t channels = 0;
  std::size_t classes = 0;
};

struct TrainSummary {
  std::size_t groups = 0;
  DistanceMeasure measure = DistanceMeasure::Chebyshev;
  std::vector<std::size_t> group_sizes;
  bool baseline_only = false;
};

struct InferSummary {
  std::size_t test_groups = 0;
  std::optional<ClassMetrics> grouped;   // configured mapping method
  std::optional<ClassMetrics> grouped_cr_cr;
  std::optional<ClassMetrics> grouped_avg;
  std::optional<ClassMetrics> baseline;
  std::vector<std::size_t> mapping_cr_cr;
  std::vector<std::size_t> mapping_avg;
};

struct ReportSummary {
  std::vector<std::filesystem::path> files;
};

IngestSummary cmd_ingest(const PipelineConfig& config);
TrainSummary cmd_train(const PipelineConfig& config, bool baseline_only = false);
InferSummary cmd_infer(const PipelineConfig& config);
ReportSummary cmd_report(const std::filesystem::path& run_dir);

// Re-hashes every artifact recorded for `stage` in the run manifest; throws IoError
// on a mismatch or a missing file.
void verify_stage_digests(const std::filesystem::path& run_dir, const std::string& stage);

// Two principal-component coordinates per row (deterministic sign convention).
Matrix pca_2d(const Matrix& points);

}  // namespace cgrl

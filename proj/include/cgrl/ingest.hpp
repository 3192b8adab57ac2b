#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cgrl/core.hpp"

namespace cgrl {

enum class Behavior { Normal = 0, Aggressive = 1, Drowsy = 2 };
enum class Road { Motorway, Secondary };

std::string_view to_string(Behavior b);
std::string_view to_string(Road r);
Road parse_road(std::string_view token);

inline constexpr std::size_t kImuChannels = 6;

struct ImuSample {
  double timestamp = 0.0;                  // seconds
  std::array<double, kImuChannels> values{};  // acc x/y/z (filtered), roll, pitch, yaw
};

struct RawSession {
  std::string driver_id;
  Behavior behavior = Behavior::Normal;
  Road road = Road::Motorway;
  std::string session_id;
  std::vector<ImuSample> samples;
  std::size_t rejected_rows = 0;
};

/// Column positions inside the raw accelerometer text file. The defaults follow the
/// published UAH-DriveSet layout: timestamp, activation flag, raw acc x/y/z,
/// Kalman-filtered acc x/y/z, roll, pitch, yaw.
struct ColumnMap {
  std::string file_name = "RAW_ACCELEROMETERS.txt";
  std::size_t timestamp = 0;
  std::array<std::size_t, kImuChannels> channels{5, 6, 7, 8, 9, 10};
};

RawSession parse_uah_session(const std::filesystem::path& directory, const ColumnMap& columns = {});

struct CorpusReport {
  std::size_t sessions_found = 0;
  std::size_t sessions_kept = 0;
  std::size_t rejected_rows = 0;
  std::vector<std::string> warnings;
};

// Recursively collects every directory holding the raw accelerometer file, in sorted
// path order. Sessions on other roads are skipped when a filter is given.
std::vector<RawSession> parse_uah_corpus(const std::filesystem::path& root, const ColumnMap& columns,
                                         std::optional<Road> road_filter, CorpusReport& report);

// Behavior class names in label order.
std::vector<std::string> behavior_class_names();

WindowedDataset window_sessions(const std::vector<RawSession>& sessions, std::size_t window_len = 64,
                                double overlap_fraction = 0.5, std::vector<std::string>* warnings = nullptr);

std::size_t window_stride_for(std::size_t window_len, double overlap_fraction);

struct SplitIndices {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

// Stratifies on (driver_id, behavior) taken from meta; on labels when meta is absent.
// Strata with fewer than two windows go entirely to train.
SplitIndices stratified_split_indices(const WindowedDataset& ds, double train_fraction, std::uint64_t seed);
std::pair<WindowedDataset, WindowedDataset> stratified_split(const WindowedDataset& ds, double train_fraction,
                                                             std::uint64_t seed);

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  bool operator==(const NormalizationStats&) const = default;
};

NormalizationStats fit_normalization(const WindowedDataset& ds);
void apply_normalization(WindowedDataset& ds, const NormalizationStats& stats);

struct SyntheticArchetype {
  double base_frequency_hz = 0.5;
  double amplitude = 1.0;
  double noise_sigma = 0.1;
  double class_effect_sign = 1.0;
};

struct SyntheticSpec {
  std::vector<SyntheticArchetype> archetypes;
  std::size_t windows_per_cell = 50;  // per (archetype, class)
  std::size_t timesteps = 64;
  std::size_t channels = 6;
  std::size_t classes = 3;
  double sample_rate_hz = 10.0;
  double class_mean_shift = 1.0;       // mean offset per unit of class effect
  double class_frequency_shift = 0.0;  // Hz per unit of class effect
  double ar_coefficient = 0.5;
  std::uint64_t seed = 42;

  void validate() const;
};

struct SyntheticDataset {
  WindowedDataset data;
  std::vector<int> archetype;
};

SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

// Three archetypes at distinct frequencies and amplitudes; the default synthetic source.
SyntheticSpec three_archetype_synthetic_spec(std::uint64_t seed);

// Two archetypes whose class effects point in opposite directions.
SyntheticSpec xor_synthetic_spec(std::uint64_t seed);

// Canonical dataset archive.
void save_dataset(const std::filesystem::path& path, const WindowedDataset& ds,
                  const std::optional<NormalizationStats>& normalization);
std::pair<WindowedDataset, std::optional<NormalizationStats>> load_dataset(const std::filesystem::path& path);

}  // namespace cgrl

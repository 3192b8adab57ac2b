#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cgrl {

// Absolute tolerance used by tests for results that are exact up to rounding.
inline constexpr double kExactTolerance = 1e-9;

// Failure classes. The CLI maps each one onto its own exit code.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

struct WindowMeta {
  std::string driver_id;
  std::string behavior;
  std::string road;
  std::string session_id;

  bool operator==(const WindowMeta&) const = default;
};

/// M windows of t timesteps by d channels, stored row-major as
/// (window, timestep, channel).
struct WindowedDataset {
  std::size_t timesteps = 0;
  std::size_t channels = 0;
  std::vector<double> values;
  std::vector<int> labels;
  std::vector<WindowMeta> meta;
  std::vector<std::string> class_names;
  // False when the labels vector is a placeholder (unlabeled test data).
  bool labeled = true;

  std::size_t size() const { return labels.size(); }
  std::size_t class_count() const { return class_names.size(); }
  std::size_t window_stride() const { return timesteps * channels; }

  std::span<const double> window(std::size_t i) const {
    return {values.data() + i * window_stride(), window_stride()};
  }

  // Throws std::invalid_argument when a type invariant is broken.
  void validate() const;

  // Copies the selected windows in the given order.
  WindowedDataset subset(std::span<const std::size_t> indices) const;

  bool operator==(const WindowedDataset&) const = default;
};

/// One compact representation vector per window.
struct AecsMatrix {
  Matrix vectors;
  std::string source_model_id;

  std::size_t size() const { return vectors.rows; }
  std::size_t dim() const { return vectors.cols; }
  std::span<const double> row(std::size_t i) const { return vectors.row(i); }

  AecsMatrix subset(std::span<const std::size_t> indices) const;
};

enum class DistanceMeasure { Chebyshev = 0, Manhattan = 1, Mahalanobis = 2 };

inline constexpr DistanceMeasure kAllMeasures[] = {
    DistanceMeasure::Chebyshev, DistanceMeasure::Manhattan, DistanceMeasure::Mahalanobis};

std::string_view to_string(DistanceMeasure m);
DistanceMeasure parse_measure(std::string_view token);

struct IterationStep {
  std::size_t k = 0;
  std::size_t difference = 0;
};

/// Assignment of M instances to K groups with the provenance of how it was made.
struct Grouping {
  std::vector<int> assignment;
  std::size_t group_count = 0;
  DistanceMeasure measure = DistanceMeasure::Chebyshev;
  std::map<DistanceMeasure, double> hubert_scores;
  std::vector<IterationStep> iteration_trace;

  std::size_t size() const { return assignment.size(); }
  std::vector<std::size_t> members(int group) const;
  std::vector<std::size_t> group_sizes() const;
  void validate() const;

  static Grouping single_group(std::size_t m);
};

struct ClassMetrics {
  double accuracy = 0.0;
  double f1_macro = 0.0;
  double f1_weighted = 0.0;
  std::vector<double> f1_per_class;
  Matrix confusion;  // rows = truth, cols = prediction
  Matrix confusion_row_normalized;
};

ClassMetrics evaluate_metrics(std::span<const int> pred, std::span<const int> truth, std::size_t class_count);

/// Seeded random stream. The engine is std::mt19937_64, whose output sequence is fixed
/// by the standard; all derived draws are computed here rather than through
/// <random> distributions so that results are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // 53-bit uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Box-Muller, one value per call.
  double normal();
  // Unbiased integer in [0, n).
  std::size_t index(std::size_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// FNV-1a over the raw bytes of a double array; used as a cheap identity tag.
std::string fingerprint(std::span<const double> values);

}  // namespace cgrl

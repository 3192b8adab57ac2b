#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cgrl/core.hpp"

namespace cgrl {

// SOFTMAX_AECS classifies the representation vector; SOFTMAX_STATS classifies
// per-channel summary statistics of the raw window.
enum class ClassifierKind { SoftmaxAecs, SoftmaxStats };

std::string_view to_string(ClassifierKind k);
ClassifierKind parse_classifier_kind(std::string_view token);

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::SoftmaxStats;
  double learning_rate = 0.1;
  std::size_t epochs = 500;
  double l2 = 1e-4;
  // Training starts from zero weights and is full-batch, so the seed only travels
  // with these settings for provenance.
  std::uint64_t seed = 42;

  void validate() const;
  bool operator==(const ClassifierSpec&) const = default;
};

/// Multinomial logistic regression on standardized features. Classes never seen
/// in training are excluded from prediction.
struct SoftmaxModel {
  std::size_t features = 0;
  std::size_t classes = 0;
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  Matrix weights;  // classes x features
  std::vector<double> bias;
  std::vector<bool> seen;
  std::size_t trained_instances = 0;

  bool operator==(const SoftmaxModel&) const = default;
};

// Mean, standard deviation, min, max and mean absolute first difference of each
// channel: 5*d values ordered channel by channel.
std::vector<double> window_statistics(std::span<const double> window, std::size_t timesteps, std::size_t channels);

Matrix classifier_features(ClassifierKind kind, const WindowedDataset& ds, const AecsMatrix& aecs);

SoftmaxModel train_softmax(const Matrix& features, std::span<const int> labels, std::size_t class_count,
                           const ClassifierSpec& spec);
std::vector<int> predict_softmax(const SoftmaxModel& model, const Matrix& features);

struct GroupModelBundle {
  ClassifierSpec spec;
  std::size_t class_count = 0;
  std::vector<SoftmaxModel> models;
  std::vector<int> train_assignment;
  std::string aecs_model_id;
  std::vector<std::string> warnings;

  std::size_t group_count() const { return models.size(); }
  // Classes present in each group's training data.
  std::vector<std::vector<bool>> class_presence() const;
};

GroupModelBundle train_per_group(const WindowedDataset& ds, const AecsMatrix& aecs, const Grouping& grouping,
                                 const ClassifierSpec& spec);
GroupModelBundle train_single_baseline(const WindowedDataset& ds, const AecsMatrix& aecs, const ClassifierSpec& spec);

// ds and aecs hold the same instances in the same order.
std::vector<int> predict(const GroupModelBundle& bundle, std::size_t model_index, const WindowedDataset& ds,
                         const AecsMatrix& aecs);

void save_bundle(const std::filesystem::path& path, const GroupModelBundle& bundle);
GroupModelBundle load_bundle(const std::filesystem::path& path);

}  // namespace cgrl

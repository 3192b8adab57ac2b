#pragma once

#include <span>
#include <string>
#include <vector>

#include "cgrl/core.hpp"
#include "cgrl/distance.hpp"
#include "cgrl/grouplearn.hpp"

namespace cgrl {

enum class MappingMethod { CrCr, Avg };

std::string_view to_string(MappingMethod m);
MappingMethod parse_mapping_method(std::string_view token);

struct GroupMapping {
  std::size_t test_group = 0;
  std::size_t train_group = 0;
  std::vector<double> candidates;  // distance to every train group
};

struct MappingReport {
  MappingMethod method = MappingMethod::Avg;
  DistanceMeasure measure = DistanceMeasure::Chebyshev;
  std::string mahalanobis_fingerprint;  // context used for distances, if any
  std::vector<GroupMapping> groups;
  std::vector<int> test_assignment;
};

/// Everything the router needs from training: the train representations, their
/// consistent grouping, and the measure (plus Mahalanobis context) selected there.
struct TrainReference {
  const AecsMatrix* aecs = nullptr;
  std::vector<int> assignment;
  std::size_t group_count = 0;
  DistanceMeasure measure = DistanceMeasure::Chebyshev;
  const MahalanobisContext* mahalanobis = nullptr;
};

// Mean of the member vectors of one group.
std::vector<double> group_representative(const AecsMatrix& aecs, std::span<const int> assignment, int group);

// argmin_i d(train_crs[i], test_cr); ties go to the smaller index.
std::size_t map_cr_cr(const Matrix& train_crs, std::span<const double> test_cr, DistanceMeasure measure,
                      const MahalanobisContext* ctx = nullptr, std::vector<double>* candidates = nullptr);

// Mean of all cross distances between the rows of two groups.
double avg_group_distance(const Matrix& train_group, const Matrix& test_group, DistanceMeasure measure,
                          const MahalanobisContext* ctx = nullptr);

// argmin_i avg_group_distance(train group i, test_group); ties go to the smaller index.
std::size_t map_avg(const AecsMatrix& train_aecs, std::span<const int> train_assignment, std::size_t train_groups,
                    const Matrix& test_group, DistanceMeasure measure, const MahalanobisContext* ctx = nullptr,
                    std::vector<double>* candidates = nullptr);

MappingReport build_mapping(const TrainReference& train, const AecsMatrix& test_aecs, const Grouping& test_grouping,
                            MappingMethod method);

struct InferenceResult {
  std::vector<int> labels;
  MappingReport report;
};

// Routes every test group to its nearest train group's model and predicts its members.
InferenceResult infer_with_groups(const GroupModelBundle& bundle, const TrainReference& train,
                                  const WindowedDataset& test, const AecsMatrix& test_aecs,
                                  const Grouping& test_grouping, MappingMethod method);

// Same routing driven by an existing report.
std::vector<int> predict_with_mapping(const GroupModelBundle& bundle, const MappingReport& report,
                                      const WindowedDataset& test, const AecsMatrix& test_aecs);

}  // namespace cgrl

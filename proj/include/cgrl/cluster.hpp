#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "cgrl/core.hpp"
#include "cgrl/distance.hpp"

namespace cgrl {

enum class Linkage { Average, Complete, Single };

std::string_view to_string(Linkage l);
Linkage parse_linkage(std::string_view token);

/// One agglomeration step. Leaves carry ids 0..M-1; the cluster created by merge s
/// gets id M+s. first < second always.
struct Merge {
  std::size_t first = 0;
  std::size_t second = 0;
  double height = 0.0;

  bool operator==(const Merge&) const = default;
};

struct Dendrogram {
  std::size_t leaves = 0;
  Linkage linkage = Linkage::Average;
  std::vector<Merge> merges;
  std::size_t monotonicity_violations = 0;
};

// Lance-Williams agglomeration. Among equal-height candidates the pair with the
// smallest (min id, max id) is merged first.
Dendrogram agglomerate(const Matrix& distances, Linkage linkage);

// Undoes the last k-1 merges. Group ids follow the order of each group's smallest member.
std::vector<int> cut(const Dendrogram& dendrogram, std::size_t k);

Matrix centroids(const Matrix& points, std::span<const int> assignment, std::size_t group_count);
inline Matrix centroids(const AecsMatrix& aecs, std::span<const int> assignment, std::size_t group_count) {
  return centroids(aecs.vectors, assignment, group_count);
}

std::size_t count_groups(std::span<const int> assignment);

// rho = 2/(M(M-1)) * sum_{i<j} d(x_i, x_j) * d(centre(c_i), centre(c_j)); zero for K = 1.
double hubert_statistic(const AecsMatrix& aecs, std::span<const int> assignment, DistanceMeasure measure,
                        const MahalanobisContext* ctx = nullptr);
// Same statistic reusing a precomputed pairwise matrix for the same measure.
double hubert_statistic(const Matrix& pairwise, const Matrix& group_centroids, std::span<const int> assignment,
                        DistanceMeasure measure, const MahalanobisContext* ctx = nullptr);

struct HubertReport {
  std::map<DistanceMeasure, double> rho;
  DistanceMeasure selected = DistanceMeasure::Chebyshev;
  std::size_t k = 0;
};

struct HcAecsResult {
  std::vector<int> assignment;
  DistanceMeasure measure = DistanceMeasure::Chebyshev;
  HubertReport report;
  Dendrogram dendrogram;          // of the selected measure
  MahalanobisContext mahalanobis;  // fitted on the clustered set
};

// Clusters under every measure, cuts at k and keeps the measure with the largest rho.
// Ties go to the earlier measure in CHEBYSHEV, MANHATTAN, MAHALANOBIS order.
HcAecsResult hc_aecs(const AecsMatrix& aecs, std::size_t k, Linkage linkage = Linkage::Average);

}  // namespace cgrl

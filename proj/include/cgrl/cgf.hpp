#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cgrl/cluster.hpp"
#include "cgrl/core.hpp"

namespace cgrl {

struct CgfConfig {
  double tau = 0.05;
  std::size_t k_start = 2;
  std::optional<std::size_t> k_max;  // defaults to min(20, M-1)
  Linkage linkage = Linkage::Average;
  // Literal reading of the iteration: rerun measure selection at every k and compare
  // consecutive groupings by optimal matching instead of nested splits.
  bool reselect_measure_per_k = false;

  void validate() const;
};

struct CgfStep {
  std::size_t k = 0;
  std::size_t new_group_size = 0;
  bool stopped = false;
  DistanceMeasure measure = DistanceMeasure::Chebyshev;
};

struct CgfResult {
  Grouping grouping;
  DistanceMeasure measure = DistanceMeasure::Chebyshev;
  HubertReport hubert;
  std::vector<CgfStep> trace;
  bool hit_k_max = false;
  std::string dendrogram_fingerprint;
  Dendrogram dendrogram;
  MahalanobisContext mahalanobis;
};

// Size of the smaller child when `next` refines `prev` by splitting one group in two.
// Otherwise (non-nested input) the number of instances left outside the best
// one-to-one correspondence between the two groupings.
std::size_t difference(std::span<const int> next, std::span<const int> prev);

// Instances outside an optimal one-to-one group matching (Hungarian assignment on the
// contingency table).
std::size_t matching_difference(std::span<const int> next, std::span<const int> prev);

CgfResult form_consistent_groups(const AecsMatrix& aecs, const CgfConfig& config);

std::string dendrogram_fingerprint(const Dendrogram& d);

}  // namespace cgrl

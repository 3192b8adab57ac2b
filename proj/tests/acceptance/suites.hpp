#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace suites {

struct CriterionResult {
  std::string id;
  bool passed = false;
  bool gating = true;
  bool skipped = false;
  std::string detail;
  double seconds = 0.0;
};

CriterionResult gradient_correctness(std::size_t seeds = 5);
CriterionResult clustering_oracle_equivalence(std::size_t cases = 200);
CriterionResult distance_statistic_oracles(std::size_t fixtures = 100);
CriterionResult cgf_recovery();
CriterionResult measure_selection();
CriterionResult end_to_end_benefit(const std::filesystem::path& scratch);
CriterionResult self_mapping_consistency();
CriterionResult single_group_degeneracy();
CriterionResult determinism(const std::filesystem::path& scratch);
// Reads the corpus root from CGRL_UAH_ROOT; skipped when unset or missing.
CriterionResult uah_reproduction(const std::filesystem::path& scratch);

// Brute-force oracle suites only (no autoencoder training).
std::vector<CriterionResult> oracle_suites();

std::vector<CriterionResult> all(const std::filesystem::path& scratch);

// "PASS id (detail)" style line.
std::string format(const CriterionResult& r);

}  // namespace suites

#include "cgrl/mapping.hpp"

#include "cgrl/cluster.hpp"

namespace cgrl {
namespace {

Matrix rows_of(const AecsMatrix& aecs, std::span<const std::size_t> idx) { return aecs.subset(idx).vectors; }

std::vector<std::size_t> members_of(std::span<const int> assignment, int group) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] == group) out.push_back(i);
  return out;
}

std::size_t argmin(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] < v[best]) best = i;
  return best;
}

}  // namespace

std::string_view to_string(MappingMethod m) { return m == MappingMethod::CrCr ? "CR_CR" : "AVG"; }

MappingMethod parse_mapping_method(std::string_view token) {
  if (token == "CR_CR") return MappingMethod::CrCr;
  if (token == "AVG") return MappingMethod::Avg;
  throw ConfigError("unknown mapping method: " + std::string(token));
}

std::vector<double> group_representative(const AecsMatrix& aecs, std::span<const int> assignment, int group) {
  if (assignment.size() != aecs.size()) throw std::invalid_argument("group_representative: assignment length mismatch");
  std::vector<double> mean(aecs.dim(), 0.0);
  std::size_t n = 0;
  for (std::size_t i = 0; i < aecs.size(); ++i) {
    if (assignment[i] != group) continue;
    ++n;
    auto r = aecs.row(i);
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += r[k];
  }
  if (n == 0) throw std::invalid_argument("group_representative: unknown or empty group " + std::to_string(group));
  for (double& v : mean) v /= static_cast<double>(n);
  return mean;
}

std::size_t map_cr_cr(const Matrix& train_crs, std::span<const double> test_cr, DistanceMeasure measure,
                      const MahalanobisContext* ctx, std::vector<double>* candidates) {
  if (train_crs.rows == 0) throw std::invalid_argument("map_cr_cr: no train groups");
  std::vector<double> d(train_crs.rows);
  for (std::size_t i = 0; i < train_crs.rows; ++i) d[i] = distance(measure, train_crs.row(i), test_cr, ctx);
  const std::size_t k = argmin(d);
  if (candidates) *candidates = std::move(d);
  return k;
}

double avg_group_distance(const Matrix& train_group, const Matrix& test_group, DistanceMeasure measure,
                          const MahalanobisContext* ctx) {
  if (train_group.rows == 0 || test_group.rows == 0) throw std::invalid_argument("avg_group_distance: empty group");
  double sum = 0.0;
  for (std::size_t i = 0; i < train_group.rows; ++i)
    for (std::size_t j = 0; j < test_group.rows; ++j) sum += distance(measure, train_group.row(i), test_group.row(j), ctx);
  return sum / (static_cast<double>(train_group.rows) * static_cast<double>(test_group.rows));
}

std::size_t map_avg(const AecsMatrix& train_aecs, std::span<const int> train_assignment, std::size_t train_groups,
                    const Matrix& test_group, DistanceMeasure measure, const MahalanobisContext* ctx,
                    std::vector<double>* candidates) {
  if (train_groups == 0) throw std::invalid_argument("map_avg: no train groups");
  std::vector<double> d(train_groups);
  for (std::size_t g = 0; g < train_groups; ++g) {
    const auto idx = members_of(train_assignment, static_cast<int>(g));
    d[g] = avg_group_distance(rows_of(train_aecs, idx), test_group, measure, ctx);
  }
  const std::size_t k = argmin(d);
  if (candidates) *candidates = std::move(d);
  return k;
}

MappingReport build_mapping(const TrainReference& train, const AecsMatrix& test_aecs, const Grouping& test_grouping,
                            MappingMethod method) {
  if (!train.aecs) throw std::invalid_argument("build_mapping: missing train representations");
  if (train.measure == DistanceMeasure::Mahalanobis && !train.mahalanobis)
    throw std::invalid_argument("build_mapping: MAHALANOBIS mapping needs the train context");
  if (test_grouping.size() != test_aecs.size()) throw std::invalid_argument("build_mapping: test grouping size mismatch");

  MappingReport report;
  report.method = method;
  report.measure = train.measure;
  if (train.mahalanobis) report.mahalanobis_fingerprint = train.mahalanobis->source_fingerprint;
  report.test_assignment = test_grouping.assignment;

  const Matrix train_crs = centroids(*train.aecs, train.assignment, train.group_count);
  for (std::size_t j = 0; j < test_grouping.group_count; ++j) {
    GroupMapping gm;
    gm.test_group = j;
    if (method == MappingMethod::CrCr) {
      const auto cr = group_representative(test_aecs, test_grouping.assignment, static_cast<int>(j));
      gm.train_group = map_cr_cr(train_crs, cr, train.measure, train.mahalanobis, &gm.candidates);
    } else {
      const auto idx = members_of(test_grouping.assignment, static_cast<int>(j));
      gm.train_group = map_avg(*train.aecs, train.assignment, train.group_count, rows_of(test_aecs, idx),
                               train.measure, train.mahalanobis, &gm.candidates);
    }
    report.groups.push_back(std::move(gm));
  }
  return report;
}

std::vector<int> predict_with_mapping(const GroupModelBundle& bundle, const MappingReport& report,
                                      const WindowedDataset& test, const AecsMatrix& test_aecs) {
  std::vector<int> labels(test.size(), -1);
  for (const GroupMapping& gm : report.groups) {
    const auto idx = members_of(report.test_assignment, static_cast<int>(gm.test_group));
    const WindowedDataset part = test.subset(idx);
    const AecsMatrix part_aecs = test_aecs.size() == test.size() ? test_aecs.subset(idx) : AecsMatrix{};
    const auto pred = predict(bundle, gm.train_group, part, part_aecs);
    for (std::size_t r = 0; r < idx.size(); ++r) labels[idx[r]] = pred[r];
  }
  return labels;
}

InferenceResult infer_with_groups(const GroupModelBundle& bundle, const TrainReference& train,
                                  const WindowedDataset& test, const AecsMatrix& test_aecs,
                                  const Grouping& test_grouping, MappingMethod method) {
  if (train.group_count != bundle.group_count())
    throw std::invalid_argument("infer_with_groups: bundle and train grouping disagree on K");
  InferenceResult out;
  out.report = build_mapping(train, test_aecs, test_grouping, method);
  out.labels = predict_with_mapping(bundle, out.report, test, test_aecs);
  return out;
}

}  // namespace cgrl

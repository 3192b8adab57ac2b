#include "cgrl/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <tuple>

namespace cgrl {
namespace {

struct Candidate {
  double height = std::numeric_limits<double>::infinity();
  std::size_t lo_id = std::numeric_limits<std::size_t>::max();
  std::size_t hi_id = std::numeric_limits<std::size_t>::max();
  std::size_t slot = std::numeric_limits<std::size_t>::max();

  bool operator<(const Candidate& o) const {
    return std::tie(height, lo_id, hi_id) < std::tie(o.height, o.lo_id, o.hi_id);
  }
};

double lance_williams(Linkage linkage, double d_ka, double d_kb, std::size_t na, std::size_t nb) {
  switch (linkage) {
    case Linkage::Single: return std::min(d_ka, d_kb);
    case Linkage::Complete: return std::max(d_ka, d_kb);
    case Linkage::Average:
      return (static_cast<double>(na) * d_ka + static_cast<double>(nb) * d_kb) / static_cast<double>(na + nb);
  }
  return 0.0;
}

void validate_distances(const Matrix& D) {
  if (D.rows != D.cols) throw std::invalid_argument("agglomerate: distance matrix must be square");
  if (D.rows < 2) throw std::invalid_argument("agglomerate: need at least two instances");
  for (std::size_t i = 0; i < D.rows; ++i) {
    if (D(i, i) != 0.0) throw std::invalid_argument("agglomerate: non-zero diagonal");
    for (std::size_t j = i + 1; j < D.rows; ++j) {
      if (D(i, j) != D(j, i)) throw std::invalid_argument("agglomerate: asymmetric distance matrix");
      if (!(D(i, j) >= 0.0) || !std::isfinite(D(i, j)))
        throw std::invalid_argument("agglomerate: negative or non-finite distance");
    }
  }
}

}  // namespace

std::string_view to_string(Linkage l) {
  switch (l) {
    case Linkage::Average: return "AVERAGE";
    case Linkage::Complete: return "COMPLETE";
    case Linkage::Single: return "SINGLE";
  }
  return "UNKNOWN";
}

Linkage parse_linkage(std::string_view token) {
  for (Linkage l : {Linkage::Average, Linkage::Complete, Linkage::Single})
    if (to_string(l) == token) return l;
  throw ConfigError("unknown linkage token: " + std::string(token));
}

Dendrogram agglomerate(const Matrix& distances, Linkage linkage) {
  validate_distances(distances);
  const std::size_t M = distances.rows;
  Matrix D = distances;
  std::vector<std::size_t> id(M), size(M, 1);
  std::iota(id.begin(), id.end(), 0);
  std::vector<bool> active(M, true);
  std::vector<Candidate> best(M);

  auto candidate = [&](std::size_t i, std::size_t j) {
    return Candidate{D(i, j), std::min(id[i], id[j]), std::max(id[i], id[j]), j};
  };
  auto rescan = [&](std::size_t i) {
    best[i] = Candidate{};
    for (std::size_t j = 0; j < M; ++j)
      if (j != i && active[j]) best[i] = std::min(best[i], candidate(i, j));
  };
  for (std::size_t i = 0; i < M; ++i) rescan(i);

  Dendrogram out;
  out.leaves = M;
  out.linkage = linkage;
  out.merges.reserve(M - 1);
  double last_height = -std::numeric_limits<double>::infinity();

  for (std::size_t step = 0; step + 1 < M; ++step) {
    std::size_t a = M;
    for (std::size_t i = 0; i < M; ++i)
      if (active[i] && (a == M || best[i] < best[a])) a = i;
    const std::size_t b = best[a].slot;
    const double height = best[a].height;
    out.merges.push_back({std::min(id[a], id[b]), std::max(id[a], id[b]), height});
    if (height < last_height) {
      ++out.monotonicity_violations;
      std::cerr << "agglomerate: merge " << step << " height " << height << " below previous " << last_height << '\n';
    }
    last_height = height;

    // The merged cluster lives in slot a.
    active[b] = false;
    for (std::size_t k = 0; k < M; ++k) {
      if (!active[k] || k == a) continue;
      const double v = lance_williams(linkage, D(k, a), D(k, b), size[a], size[b]);
      D(k, a) = v;
      D(a, k) = v;
    }
    size[a] += size[b];
    id[a] = M + step;

    rescan(a);
    for (std::size_t k = 0; k < M; ++k) {
      if (!active[k] || k == a) continue;
      if (best[k].slot == a || best[k].slot == b) {
        rescan(k);
      } else {
        best[k] = std::min(best[k], candidate(k, a));
      }
    }
  }
  return out;
}

std::vector<int> cut(const Dendrogram& dendrogram, std::size_t k) {
  const std::size_t M = dendrogram.leaves;
  if (k < 1 || k > M) throw std::invalid_argument("cut: k out of range");
  // parent pointers over leaves and internal nodes
  std::vector<std::size_t> parent(2 * M - 1);
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t s = 0; s < M - k; ++s) {
    const Merge& m = dendrogram.merges[s];
    parent[m.first] = M + s;
    parent[m.second] = M + s;
  }
  auto root = [&parent](std::size_t x) {
    while (parent[x] != x) x = parent[x];
    return x;
  };
  std::vector<int> assignment(M);
  std::vector<int> label(2 * M - 1, -1);
  int next = 0;
  for (std::size_t i = 0; i < M; ++i) {
    const std::size_t r = root(i);
    if (label[r] < 0) label[r] = next++;
    assignment[i] = label[r];
  }
  return assignment;
}

std::size_t count_groups(std::span<const int> assignment) {
  int mx = -1;
  for (int g : assignment) mx = std::max(mx, g);
  return static_cast<std::size_t>(mx + 1);
}

Matrix centroids(const Matrix& points, std::span<const int> assignment, std::size_t group_count) {
  if (assignment.size() != points.rows) throw std::invalid_argument("centroids: assignment length mismatch");
  Matrix c(group_count, points.cols);
  std::vector<std::size_t> counts(group_count, 0);
  for (std::size_t i = 0; i < points.rows; ++i) {
    const auto g = static_cast<std::size_t>(assignment[i]);
    if (g >= group_count) throw std::invalid_argument("centroids: group id out of range");
    ++counts[g];
    auto row = points.row(i);
    for (std::size_t k = 0; k < points.cols; ++k) c(g, k) += row[k];
  }
  for (std::size_t g = 0; g < group_count; ++g) {
    if (counts[g] == 0) throw std::invalid_argument("centroids: empty group");
    for (std::size_t k = 0; k < points.cols; ++k) c(g, k) /= static_cast<double>(counts[g]);
  }
  return c;
}

double hubert_statistic(const Matrix& pairwise, const Matrix& group_centroids, std::span<const int> assignment,
                        DistanceMeasure measure, const MahalanobisContext* ctx) {
  const std::size_t M = assignment.size();
  const std::size_t K = group_centroids.rows;
  if (pairwise.rows != M) throw std::invalid_argument("hubert: pairwise matrix size mismatch");
  if (M < 2 || K < 2) return 0.0;
  Matrix cd(K, K);
  for (std::size_t a = 0; a < K; ++a)
    for (std::size_t b = a + 1; b < K; ++b) {
      const double v = distance(measure, group_centroids.row(a), group_centroids.row(b), ctx);
      cd(a, b) = v;
      cd(b, a) = v;
    }
  double sum = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    const auto gi = static_cast<std::size_t>(assignment[i]);
    for (std::size_t j = i + 1; j < M; ++j) {
      const auto gj = static_cast<std::size_t>(assignment[j]);
      if (gi != gj) sum += pairwise(i, j) * cd(gi, gj);
    }
  }
  return 2.0 * sum / (static_cast<double>(M) * static_cast<double>(M - 1));
}

double hubert_statistic(const AecsMatrix& aecs, std::span<const int> assignment, DistanceMeasure measure,
                        const MahalanobisContext* ctx) {
  if (assignment.size() != aecs.size()) throw std::invalid_argument("hubert: assignment length mismatch");
  if (measure == DistanceMeasure::Mahalanobis && !ctx)
    throw std::invalid_argument("hubert: MAHALANOBIS requires a fitted context");
  const std::size_t K = count_groups(assignment);
  if (aecs.size() < 2 || K < 2) return 0.0;
  const Matrix D = pairwise_matrix(aecs, measure, ctx);
  return hubert_statistic(D, centroids(aecs, assignment, K), assignment, measure, ctx);
}

HcAecsResult hc_aecs(const AecsMatrix& aecs, std::size_t k, Linkage linkage) {
  if (k < 2) throw std::invalid_argument("hc_aecs: k must be >= 2");
  if (k > aecs.size()) throw std::invalid_argument("hc_aecs: k exceeds instance count");
  HcAecsResult result;
  result.mahalanobis = fit_mahalanobis(aecs);
  result.report.k = k;
  bool have = false;
  for (DistanceMeasure m : kAllMeasures) {
    const Matrix D = pairwise_matrix(aecs, m, &result.mahalanobis);
    Dendrogram dendro = agglomerate(D, linkage);
    std::vector<int> assignment = cut(dendro, k);
    const double rho = hubert_statistic(D, centroids(aecs, assignment, k), assignment, m, &result.mahalanobis);
    result.report.rho[m] = rho;
    if (!have || rho > result.report.rho[result.measure]) {
      have = true;
      result.measure = m;
      result.assignment = std::move(assignment);
      result.dendrogram = std::move(dendro);
    }
  }
  result.report.selected = result.measure;
  return result;
}

}  // namespace cgrl

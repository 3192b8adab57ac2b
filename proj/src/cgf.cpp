#include "cgrl/cgf.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>

namespace cgrl {

void CgfConfig::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("cgf: tau must lie in (0, 1)");
  if (k_start < 2) throw ConfigError("cgf: k_start must be >= 2");
  if (k_max && *k_max < k_start) throw ConfigError("cgf: k_max must be >= k_start");
}

std::size_t matching_difference(std::span<const int> next, std::span<const int> prev) {
  if (next.size() != prev.size()) throw std::invalid_argument("difference: assignment length mismatch");
  const std::size_t rows = count_groups(prev);
  const std::size_t cols = count_groups(next);
  const std::size_t n = std::max(rows, cols);
  if (n == 0) return 0;
  // Minimise -overlap on a square padded table; 1-based Hungarian with potentials.
  std::vector<std::vector<long long>> cost(n + 1, std::vector<long long>(n + 1, 0));
  for (std::size_t i = 0; i < next.size(); ++i)
    cost[static_cast<std::size_t>(prev[i]) + 1][static_cast<std::size_t>(next[i]) + 1] -= 1;

  const long long inf = std::numeric_limits<long long>::max() / 4;
  std::vector<long long> u(n + 1, 0), v(n + 1, 0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<long long> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      long long delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const long long cur = cost[i0][j] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  long long matched = 0;
  for (std::size_t j = 1; j <= n; ++j) matched -= cost[p[j]][j];
  return next.size() - static_cast<std::size_t>(matched);
}

std::size_t difference(std::span<const int> next, std::span<const int> prev) {
  if (next.size() != prev.size()) throw std::invalid_argument("difference: assignment length mismatch");
  const std::size_t K_next = count_groups(next);
  const std::size_t K_prev = count_groups(prev);
  std::vector<int> parent(K_next, -1);
  std::vector<std::size_t> next_size(K_next, 0);
  bool refines = true;
  for (std::size_t i = 0; i < next.size(); ++i) {
    const auto g = static_cast<std::size_t>(next[i]);
    ++next_size[g];
    if (parent[g] < 0) {
      parent[g] = prev[i];
    } else if (parent[g] != prev[i]) {
      refines = false;
    }
  }
  if (refines) {
    std::vector<std::vector<std::size_t>> children(K_prev);
    for (std::size_t g = 0; g < K_next; ++g)
      if (parent[g] >= 0) children[static_cast<std::size_t>(parent[g])].push_back(g);
    std::size_t split_groups = 0;
    std::size_t smaller = 0;
    bool simple = true;
    for (const auto& ch : children) {
      if (ch.size() == 2) {
        ++split_groups;
        smaller = std::min(next_size[ch[0]], next_size[ch[1]]);
      } else if (ch.size() != 1) {
        simple = false;
      }
    }
    if (simple && split_groups == 0) return 0;
    if (simple && split_groups == 1) return smaller;
  }
  return matching_difference(next, prev);
}

std::string dendrogram_fingerprint(const Dendrogram& d) {
  std::vector<double> flat;
  flat.reserve(d.merges.size() * 3 + 2);
  flat.push_back(static_cast<double>(d.leaves));
  flat.push_back(static_cast<double>(static_cast<int>(d.linkage)));
  for (const Merge& m : d.merges) {
    flat.push_back(static_cast<double>(m.first));
    flat.push_back(static_cast<double>(m.second));
    flat.push_back(m.height);
  }
  return fingerprint(flat);
}

CgfResult form_consistent_groups(const AecsMatrix& aecs, const CgfConfig& config) {
  config.validate();
  const std::size_t N = aecs.size();
  if (N < 3) throw std::invalid_argument("cgf: need at least three instances");
  std::size_t k_max = config.k_max.value_or(std::min<std::size_t>(20, N - 1));
  k_max = std::min(k_max, N);
  if (k_max < config.k_start) throw ConfigError("cgf: k_max below k_start for this dataset");
  const double threshold = config.tau * static_cast<double>(N);

  CgfResult result;
  std::vector<int> prev;
  HcAecsResult prev_hc;
  std::vector<int> accepted;

  auto finish = [&](const std::vector<int>& assignment, const HcAecsResult& hc) {
    result.grouping.assignment = assignment;
    result.grouping.group_count = count_groups(assignment);
    result.grouping.measure = hc.measure;
    result.grouping.hubert_scores = hc.report.rho;
    for (const CgfStep& s : result.trace) result.grouping.iteration_trace.push_back({s.k, s.new_group_size});
    result.measure = hc.measure;
    result.hubert = hc.report;
    result.dendrogram = hc.dendrogram;
    result.dendrogram_fingerprint = dendrogram_fingerprint(hc.dendrogram);
    result.mahalanobis = hc.mahalanobis;
    result.grouping.validate();
    return result;
  };

  if (!config.reselect_measure_per_k) {
    const HcAecsResult hc = hc_aecs(aecs, config.k_start, config.linkage);
    prev = cut(hc.dendrogram, config.k_start - 1);
    for (std::size_t k = config.k_start; k <= k_max; ++k) {
      std::vector<int> cur = cut(hc.dendrogram, k);
      const std::size_t diff = difference(cur, prev);
      const bool stop = static_cast<double>(diff) < threshold;
      result.trace.push_back({k, diff, stop, hc.measure});
      if (stop) return finish(prev, hc);
      prev = std::move(cur);
    }
    result.hit_k_max = true;
    return finish(prev, hc);
  }

  if (config.k_start == 2) {
    prev.assign(N, 0);
    prev_hc = hc_aecs(aecs, 2, config.linkage);
  } else {
    prev_hc = hc_aecs(aecs, config.k_start - 1, config.linkage);
    prev = prev_hc.assignment;
  }
  for (std::size_t k = config.k_start; k <= k_max; ++k) {
    HcAecsResult hc = hc_aecs(aecs, k, config.linkage);
    const std::size_t diff = matching_difference(hc.assignment, prev);
    const bool stop = static_cast<double>(diff) < threshold;
    result.trace.push_back({k, diff, stop, hc.measure});
    if (stop) return finish(prev, prev_hc);
    prev = hc.assignment;
    prev_hc = std::move(hc);
  }
  result.hit_k_max = true;
  return finish(prev, prev_hc);
}

}  // namespace cgrl

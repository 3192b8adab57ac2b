#include "cgrl/core.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>
#include <iomanip>

namespace cgrl {

void WindowedDataset::validate() const {
  if (labels.empty()) throw std::invalid_argument("dataset: no windows");
  if (timesteps < 2) throw std::invalid_argument("dataset: timesteps must be >= 2");
  if (channels < 1) throw std::invalid_argument("dataset: channels must be >= 1");
  if (values.size() != labels.size() * window_stride())
    throw std::invalid_argument("dataset: tensor size does not match M*t*d");
  if (!meta.empty() && meta.size() != labels.size())
    throw std::invalid_argument("dataset: meta length differs from label count");
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= class_names.size())
      throw std::invalid_argument("dataset: label out of range");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("dataset: non-finite value");
  }
}

WindowedDataset WindowedDataset::subset(std::span<const std::size_t> indices) const {
  WindowedDataset out;
  out.timesteps = timesteps;
  out.channels = channels;
  out.class_names = class_names;
  out.labeled = labeled;
  out.values.reserve(indices.size() * window_stride());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    auto w = window(i);
    out.values.insert(out.values.end(), w.begin(), w.end());
    out.labels.push_back(labels[i]);
    if (!meta.empty()) out.meta.push_back(meta[i]);
  }
  return out;
}

AecsMatrix AecsMatrix::subset(std::span<const std::size_t> indices) const {
  AecsMatrix out;
  out.source_model_id = source_model_id;
  out.vectors = Matrix(indices.size(), dim());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    auto src = row(indices[r]);
    std::copy(src.begin(), src.end(), out.vectors.row(r).begin());
  }
  return out;
}

std::string_view to_string(DistanceMeasure m) {
  switch (m) {
    case DistanceMeasure::Chebyshev: return "CHEBYSHEV";
    case DistanceMeasure::Manhattan: return "MANHATTAN";
    case DistanceMeasure::Mahalanobis: return "MAHALANOBIS";
  }
  return "UNKNOWN";
}

DistanceMeasure parse_measure(std::string_view token) {
  for (DistanceMeasure m : kAllMeasures) {
    if (to_string(m) == token) return m;
  }
  throw ConfigError("unknown distance measure token: " + std::string(token));
}

std::vector<std::size_t> Grouping::members(int group) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == group) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> Grouping::group_sizes() const {
  std::vector<std::size_t> sizes(group_count, 0);
  for (int g : assignment) ++sizes[static_cast<std::size_t>(g)];
  return sizes;
}

void Grouping::validate() const {
  if (group_count < 1) throw std::invalid_argument("grouping: K must be >= 1");
  std::vector<bool> seen(group_count, false);
  for (int g : assignment) {
    if (g < 0 || static_cast<std::size_t>(g) >= group_count)
      throw std::invalid_argument("grouping: group id out of range");
    seen[static_cast<std::size_t>(g)] = true;
  }
  for (bool s : seen) {
    if (!s) throw std::invalid_argument("grouping: empty group id");
  }
}

Grouping Grouping::single_group(std::size_t m) {
  Grouping g;
  g.assignment.assign(m, 0);
  g.group_count = 1;
  return g;
}

ClassMetrics evaluate_metrics(std::span<const int> pred, std::span<const int> truth, std::size_t class_count) {
  if (pred.size() != truth.size()) throw std::invalid_argument("metrics: length mismatch");
  if (pred.empty()) throw std::invalid_argument("metrics: empty label vectors");
  auto in_range = [class_count](int v) { return v >= 0 && static_cast<std::size_t>(v) < class_count; };

  ClassMetrics out;
  out.confusion = Matrix(class_count, class_count);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!in_range(pred[i]) || !in_range(truth[i])) throw std::invalid_argument("metrics: label out of range");
    out.confusion(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(pred[i])) += 1.0;
    if (pred[i] == truth[i]) ++correct;
  }
  const double n = static_cast<double>(pred.size());
  out.accuracy = static_cast<double>(correct) / n;

  out.confusion_row_normalized = Matrix(class_count, class_count);
  out.f1_per_class.assign(class_count, 0.0);
  double macro_sum = 0.0;
  std::size_t present = 0;
  double weighted_sum = 0.0;
  for (std::size_t c = 0; c < class_count; ++c) {
    double support = 0.0;
    double predicted = 0.0;
    for (std::size_t j = 0; j < class_count; ++j) {
      support += out.confusion(c, j);
      predicted += out.confusion(j, c);
    }
    const double tp = out.confusion(c, c);
    const double denom = support + predicted;  // 2tp + fp + fn
    const double f1 = denom > 0.0 ? 2.0 * tp / denom : 0.0;
    out.f1_per_class[c] = f1;
    if (support > 0.0) {
      macro_sum += f1;
      ++present;
      weighted_sum += support * f1;
      for (std::size_t j = 0; j < class_count; ++j)
        out.confusion_row_normalized(c, j) = out.confusion(c, j) / support;
    }
  }
  out.f1_macro = present > 0 ? macro_sum / static_cast<double>(present) : 0.0;
  out.f1_weighted = weighted_sum / n;
  return out;
}

double Rng::normal() {
  // u1 in (0, 1] keeps the log finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("Rng::index: empty range");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

std::string fingerprint(std::span<const double> values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : values) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace cgrl

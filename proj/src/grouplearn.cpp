#include "cgrl/grouplearn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cgrl/container.hpp"

namespace cgrl {
namespace {

constexpr std::string_view kBundleMagic = "CGBNv1";

Json spec_to_json(const ClassifierSpec& s) {
  return {{"kind", to_string(s.kind)},
          {"learning_rate", s.learning_rate},
          {"epochs", s.epochs},
          {"l2", s.l2},
          {"seed", s.seed}};
}

ClassifierSpec spec_from_json(const Json& j) {
  ClassifierSpec s;
  s.kind = parse_classifier_kind(j.at("kind").get<std::string>());
  s.learning_rate = j.at("learning_rate");
  s.epochs = j.at("epochs");
  s.l2 = j.at("l2");
  s.seed = j.at("seed");
  return s;
}

}  // namespace

std::string_view to_string(ClassifierKind k) {
  return k == ClassifierKind::SoftmaxAecs ? "SOFTMAX_AECS" : "SOFTMAX_STATS";
}

ClassifierKind parse_classifier_kind(std::string_view token) {
  if (token == "SOFTMAX_AECS") return ClassifierKind::SoftmaxAecs;
  if (token == "SOFTMAX_STATS") return ClassifierKind::SoftmaxStats;
  throw ConfigError("unknown classifier kind: " + std::string(token));
}

void ClassifierSpec::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("classifier: learning rate must be positive");
  if (epochs < 1) throw ConfigError("classifier: epochs must be >= 1");
  if (!(l2 >= 0.0)) throw ConfigError("classifier: L2 weight must be >= 0");
}

std::vector<double> window_statistics(std::span<const double> window, std::size_t timesteps, std::size_t channels) {
  std::vector<double> out;
  out.reserve(5 * channels);
  const double n = static_cast<double>(timesteps);
  for (std::size_t c = 0; c < channels; ++c) {
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double abs_diff = 0.0;
    for (std::size_t s = 0; s < timesteps; ++s) {
      const double v = window[s * channels + c];
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      if (s > 0) abs_diff += std::abs(v - window[(s - 1) * channels + c]);
    }
    const double mean = sum / n;
    double var = 0.0;
    for (std::size_t s = 0; s < timesteps; ++s) {
      const double e = window[s * channels + c] - mean;
      var += e * e;
    }
    out.push_back(mean);
    out.push_back(std::sqrt(var / n));
    out.push_back(lo);
    out.push_back(hi);
    out.push_back(timesteps > 1 ? abs_diff / (n - 1.0) : 0.0);
  }
  return out;
}

Matrix classifier_features(ClassifierKind kind, const WindowedDataset& ds, const AecsMatrix& aecs) {
  if (kind == ClassifierKind::SoftmaxAecs) {
    if (aecs.size() != ds.size()) throw std::invalid_argument("classifier: representation rows do not match dataset");
    return aecs.vectors;
  }
  Matrix X(ds.size(), 5 * ds.channels);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto f = window_statistics(ds.window(i), ds.timesteps, ds.channels);
    std::copy(f.begin(), f.end(), X.row(i).begin());
  }
  return X;
}

SoftmaxModel train_softmax(const Matrix& X, std::span<const int> y, std::size_t class_count,
                           const ClassifierSpec& spec) {
  spec.validate();
  if (X.rows != y.size()) throw std::invalid_argument("train_softmax: feature/label length mismatch");
  if (X.rows == 0) throw std::invalid_argument("train_softmax: no training instances");
  const std::size_t n = X.rows;
  const std::size_t F = X.cols;
  const std::size_t C = class_count;

  SoftmaxModel m;
  m.features = F;
  m.classes = C;
  m.trained_instances = n;
  m.weights = Matrix(C, F);
  m.bias.assign(C, 0.0);
  m.seen.assign(C, false);
  for (int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= C) throw std::invalid_argument("train_softmax: label out of range");
    m.seen[static_cast<std::size_t>(label)] = true;
  }

  m.feature_mean.assign(F, 0.0);
  m.feature_scale.assign(F, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < F; ++f) m.feature_mean[f] += X(i, f);
  for (double& v : m.feature_mean) v /= static_cast<double>(n);
  for (std::size_t f = 0; f < F; ++f) {
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = X(i, f) - m.feature_mean[f];
      var += e * e;
    }
    const double sd = std::sqrt(var / static_cast<double>(n));
    m.feature_scale[f] = sd > 1e-12 ? sd : 1.0;
  }
  Matrix Z(n, F);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < F; ++f) Z(i, f) = (X(i, f) - m.feature_mean[f]) / m.feature_scale[f];

  const std::size_t seen_count = static_cast<std::size_t>(std::count(m.seen.begin(), m.seen.end(), true));
  if (seen_count < 2) return m;  // constant predictor

  Matrix gW(C, F);
  std::vector<double> gb(C);
  std::vector<double> p(C);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
    std::fill(gW.data.begin(), gW.data.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto z = Z.row(i);
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < C; ++c) {
        if (!m.seen[c]) continue;
        double a = m.bias[c];
        for (std::size_t f = 0; f < F; ++f) a += m.weights(c, f) * z[f];
        p[c] = a;
        mx = std::max(mx, a);
      }
      double norm = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        if (!m.seen[c]) continue;
        p[c] = std::exp(p[c] - mx);
        norm += p[c];
      }
      for (std::size_t c = 0; c < C; ++c) {
        if (!m.seen[c]) continue;
        const double r = p[c] / norm - (static_cast<int>(c) == y[i] ? 1.0 : 0.0);
        gb[c] += r;
        for (std::size_t f = 0; f < F; ++f) gW(c, f) += r * z[f];
      }
    }
    for (std::size_t c = 0; c < C; ++c) {
      if (!m.seen[c]) continue;
      m.bias[c] -= spec.learning_rate * gb[c] * inv_n;
      for (std::size_t f = 0; f < F; ++f)
        m.weights(c, f) -= spec.learning_rate * (gW(c, f) * inv_n + spec.l2 * m.weights(c, f));
    }
  }
  return m;
}

std::vector<int> predict_softmax(const SoftmaxModel& m, const Matrix& X) {
  if (X.rows > 0 && X.cols != m.features) throw std::invalid_argument("predict: feature width mismatch");
  std::vector<int> out(X.rows, 0);
  std::vector<double> z(m.features);
  for (std::size_t i = 0; i < X.rows; ++i) {
    for (std::size_t f = 0; f < m.features; ++f) z[f] = (X(i, f) - m.feature_mean[f]) / m.feature_scale[f];
    int best = -1;
    double best_score = 0.0;
    for (std::size_t c = 0; c < m.classes; ++c) {
      if (!m.seen[c]) continue;
      double a = m.bias[c];
      for (std::size_t f = 0; f < m.features; ++f) a += m.weights(c, f) * z[f];
      if (best < 0 || a > best_score) {
        best = static_cast<int>(c);
        best_score = a;
      }
    }
    out[i] = best < 0 ? 0 : best;
  }
  return out;
}

std::vector<std::vector<bool>> GroupModelBundle::class_presence() const {
  std::vector<std::vector<bool>> out;
  for (const auto& m : models) out.push_back(m.seen);
  return out;
}

GroupModelBundle train_per_group(const WindowedDataset& ds, const AecsMatrix& aecs, const Grouping& grouping,
                                 const ClassifierSpec& spec) {
  spec.validate();
  grouping.validate();
  if (grouping.size() != ds.size()) throw std::invalid_argument("train_per_group: grouping does not cover the dataset");
  if (spec.kind == ClassifierKind::SoftmaxAecs && aecs.size() != ds.size())
    throw std::invalid_argument("train_per_group: representation rows do not match dataset");

  GroupModelBundle bundle;
  bundle.spec = spec;
  bundle.class_count = ds.class_count();
  bundle.train_assignment = grouping.assignment;
  bundle.aecs_model_id = aecs.source_model_id;
  const Matrix X = classifier_features(spec.kind, ds, aecs);
  for (std::size_t g = 0; g < grouping.group_count; ++g) {
    const auto idx = grouping.members(static_cast<int>(g));
    Matrix Xg(idx.size(), X.cols);
    std::vector<int> yg;
    yg.reserve(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      std::copy(X.row(idx[r]).begin(), X.row(idx[r]).end(), Xg.row(r).begin());
      yg.push_back(ds.labels[idx[r]]);
    }
    SoftmaxModel model = train_softmax(Xg, yg, bundle.class_count, spec);
    if (std::count(model.seen.begin(), model.seen.end(), true) < 2)
      bundle.warnings.push_back("group " + std::to_string(g) + " holds a single class; constant predictor");
    bundle.models.push_back(std::move(model));
  }
  return bundle;
}

GroupModelBundle train_single_baseline(const WindowedDataset& ds, const AecsMatrix& aecs, const ClassifierSpec& spec) {
  return train_per_group(ds, aecs, Grouping::single_group(ds.size()), spec);
}

std::vector<int> predict(const GroupModelBundle& bundle, std::size_t model_index, const WindowedDataset& ds,
                         const AecsMatrix& aecs) {
  if (model_index >= bundle.models.size()) throw std::out_of_range("predict: model index out of range");
  if (ds.size() == 0) return {};
  return predict_softmax(bundle.models[model_index], classifier_features(bundle.spec.kind, ds, aecs));
}

void save_bundle(const std::filesystem::path& path, const GroupModelBundle& bundle) {
  Json header;
  header["format"] = "cgrl-bundle";
  header["version"] = 1;
  header["spec"] = spec_to_json(bundle.spec);
  header["class_count"] = bundle.class_count;
  header["aecs_model_id"] = bundle.aecs_model_id;
  header["train_assignment"] = bundle.train_assignment;
  header["warnings"] = bundle.warnings;
  std::vector<double> blob;
  Json models = Json::array();
  for (const SoftmaxModel& m : bundle.models) {
    Json jm;
    jm["features"] = m.features;
    jm["classes"] = m.classes;
    jm["seen"] = m.seen;
    jm["trained_instances"] = m.trained_instances;
    jm["offset"] = blob.size();
    blob.insert(blob.end(), m.feature_mean.begin(), m.feature_mean.end());
    blob.insert(blob.end(), m.feature_scale.begin(), m.feature_scale.end());
    blob.insert(blob.end(), m.weights.data.begin(), m.weights.data.end());
    blob.insert(blob.end(), m.bias.begin(), m.bias.end());
    jm["length"] = blob.size() - jm["offset"].get<std::size_t>();
    models.push_back(std::move(jm));
  }
  header["models"] = std::move(models);
  write_container(path, kBundleMagic, header, blob);
}

GroupModelBundle load_bundle(const std::filesystem::path& path) {
  Container c = read_container(path, kBundleMagic);
  GroupModelBundle b;
  try {
    const Json& h = c.header;
    if (h.at("format") != "cgrl-bundle") throw IoError("not a model bundle: " + path.string());
    b.spec = spec_from_json(h.at("spec"));
    b.class_count = h.at("class_count");
    b.aecs_model_id = h.at("aecs_model_id");
    b.train_assignment = h.at("train_assignment").get<std::vector<int>>();
    b.warnings = h.at("warnings").get<std::vector<std::string>>();
    for (const Json& jm : h.at("models")) {
      SoftmaxModel m;
      m.features = jm.at("features");
      m.classes = jm.at("classes");
      m.seen = jm.at("seen").get<std::vector<bool>>();
      m.trained_instances = jm.at("trained_instances");
      std::size_t pos = jm.at("offset");
      const std::size_t length = jm.at("length");
      if (length != 2 * m.features + m.classes * m.features + m.classes || pos + length > c.payload.size())
        throw IoError("bundle blob layout mismatch: " + path.string());
      auto take = [&](std::size_t count) {
        std::vector<double> v(c.payload.begin() + static_cast<std::ptrdiff_t>(pos),
                              c.payload.begin() + static_cast<std::ptrdiff_t>(pos + count));
        pos += count;
        return v;
      };
      m.feature_mean = take(m.features);
      m.feature_scale = take(m.features);
      m.weights = Matrix(m.classes, m.features);
      m.weights.data = take(m.classes * m.features);
      m.bias = take(m.classes);
      b.models.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed bundle header in " + path.string() + ": " + e.what());
  }
  return b;
}

}  // namespace cgrl

#include "cgrl/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "cgrl/cluster.hpp"

namespace cgrl {
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kAecsMagic = "CGMXv1";
constexpr const char* kVersion = "1.0.0";

// ---- config parsing ----

void check_keys(const Json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
      throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

template <typename T>
void read(const Json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

std::string read_token(const Json& obj, const char* key, const std::string& fallback, const std::string& where) {
  std::string v = fallback;
  read(obj, key, v, where);
  return v;
}

SyntheticSpec synthetic_from_json(const Json& j) {
  const std::string where = "dataset.synthetic";
  check_keys(j,
             {"preset", "archetypes", "windows_per_cell", "timesteps", "channels", "classes", "sample_rate_hz",
              "class_mean_shift", "class_frequency_shift", "ar_coefficient", "seed"},
             where);
  SyntheticSpec spec;
  const std::string preset = read_token(j, "preset", "three_archetype", where);
  if (preset == "xor") {
    spec = xor_synthetic_spec(spec.seed);
  } else if (preset == "three_archetype") {
    spec = three_archetype_synthetic_spec(spec.seed);
  } else {
    throw ConfigError(where + ": unknown preset '" + preset + "' (expected three_archetype or xor)");
  }
  if (j.contains("archetypes")) {
    spec.archetypes.clear();
    for (const Json& a : j.at("archetypes")) {
      check_keys(a, {"base_frequency_hz", "amplitude", "noise_sigma", "class_effect_sign"}, where + ".archetypes[]");
      SyntheticArchetype arch;
      read(a, "base_frequency_hz", arch.base_frequency_hz, where);
      read(a, "amplitude", arch.amplitude, where);
      read(a, "noise_sigma", arch.noise_sigma, where);
      read(a, "class_effect_sign", arch.class_effect_sign, where);
      spec.archetypes.push_back(arch);
    }
  }
  read(j, "windows_per_cell", spec.windows_per_cell, where);
  read(j, "timesteps", spec.timesteps, where);
  read(j, "channels", spec.channels, where);
  read(j, "classes", spec.classes, where);
  read(j, "sample_rate_hz", spec.sample_rate_hz, where);
  read(j, "class_mean_shift", spec.class_mean_shift, where);
  read(j, "class_frequency_shift", spec.class_frequency_shift, where);
  read(j, "ar_coefficient", spec.ar_coefficient, where);
  read(j, "seed", spec.seed, where);
  return spec;
}

Json synthetic_to_json(const SyntheticSpec& s) {
  Json arch = Json::array();
  for (const auto& a : s.archetypes)
    arch.push_back({{"base_frequency_hz", a.base_frequency_hz},
                    {"amplitude", a.amplitude},
                    {"noise_sigma", a.noise_sigma},
                    {"class_effect_sign", a.class_effect_sign}});
  return {{"archetypes", arch},
          {"windows_per_cell", s.windows_per_cell},
          {"timesteps", s.timesteps},
          {"channels", s.channels},
          {"classes", s.classes},
          {"sample_rate_hz", s.sample_rate_hz},
          {"class_mean_shift", s.class_mean_shift},
          {"class_frequency_shift", s.class_frequency_shift},
          {"ar_coefficient", s.ar_coefficient},
          {"seed", s.seed}};
}

// ---- formatting ----

std::string fmt_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return ec == std::errc() ? std::string(buf.data(), ptr) : std::string("nan");
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < m.rows; ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  return rows;
}

// ---- run directory plumbing ----

class RunLock {
 public:
  explicit RunLock(const fs::path& run_dir) : path_(run_dir / run_files::kLock) {
    fs::create_directories(run_dir);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) throw IoError("run directory is locked by another process (remove " + path_.string() + " if stale)");
  }
  ~RunLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      std::error_code ec;
      fs::remove(path_, ec);
    }
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

class StageRecorder {
 public:
  StageRecorder(fs::path run_dir, std::string stage) : run_dir_(std::move(run_dir)), stage_(std::move(stage)) {}

  void artifact(const char* relative) { artifacts_.push_back(relative); }

  template <typename F>
  auto timed(const std::string& name, F&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      timings_[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    } else {
      auto out = fn();
      timings_[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      return out;
    }
  }

  void commit(const PipelineConfig& config, const Json& extra = Json::object()) {
    const fs::path manifest_path = run_dir_ / run_files::kManifest;
    Json manifest = Json::object();
    if (fs::exists(manifest_path)) manifest = Json::parse(read_text_file(manifest_path));
    manifest["version"] = kVersion;
    manifest["formats"] = {{"dataset", "CGDSv1"}, {"model", "CGAEv1"}, {"bundle", "CGBNv1"}, {"aecs", "CGMXv1"}};
    manifest["config"] = config.to_json();
    manifest["seeds"] = {{"split", config.ingest.seed},
                         {"synthetic", config.ingest.synthetic.seed},
                         {"autoencoder", config.autoencoder.seed},
                         {"classifier", config.classifier.seed}};
    Json stage = Json::object();
    Json files = Json::array();
    for (const auto& rel : artifacts_) files.push_back({{"path", rel}, {"sha256", sha256_file(run_dir_ / rel)}});
    stage["artifacts"] = files;
    stage["timings_seconds"] = timings_;
    for (const auto& item : extra.items()) stage[item.key()] = item.value();
    manifest["stages"][stage_] = stage;
    write_text_file(manifest_path, manifest.dump(2) + "\n");
  }

 private:
  fs::path run_dir_;
  std::string stage_;
  std::vector<std::string> artifacts_;
  std::map<std::string, double> timings_;
};

void write_json(const fs::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

Json train_report_to_json(const TrainReport& r) {
  // Wall-clock times are kept out of this artifact so reruns hash identically.
  return {{"initial_loss", r.initial_loss},     {"train_loss", r.train_loss},
          {"validation_loss", r.validation_loss}, {"stopped_epoch", r.stopped_epoch},
          {"best_epoch", r.best_epoch},         {"optimizer_steps", r.optimizer_steps},
          {"final_loss", r.final_loss}};
}

Grouping grouping_from_cgf_json(const Json& j) {
  Grouping g;
  g.assignment = j.at("assignment").get<std::vector<int>>();
  g.group_count = j.at("K");
  g.measure = parse_measure(j.at("measure").get<std::string>());
  g.validate();
  return g;
}

void write_predictions(const fs::path& path, const WindowedDataset& test, const std::vector<int>& pred,
                       const MappingReport* report) {
  std::ostringstream os;
  os << "index,predicted,true,test_group,train_group\n";
  std::vector<int> train_group(test.size(), 0);
  if (report) {
    for (const auto& gm : report->groups)
      for (std::size_t i = 0; i < report->test_assignment.size(); ++i)
        if (report->test_assignment[i] == static_cast<int>(gm.test_group)) train_group[i] = static_cast<int>(gm.train_group);
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    os << i << ',' << pred[i] << ',';
    if (test.labeled) os << test.labels[i];
    os << ',' << (report ? report->test_assignment[i] : 0) << ',' << train_group[i] << '\n';
  }
  write_text_file(path, os.str());
}

void write_confusion_csv(const fs::path& path, const ClassMetrics& m, const std::vector<std::string>& names) {
  std::ostringstream os;
  os << "kind,true_class";
  for (const auto& n : names) os << ',' << n;
  os << '\n';
  for (const char* kind : {"count", "row_normalized"}) {
    const Matrix& src = std::string(kind) == "count" ? m.confusion : m.confusion_row_normalized;
    for (std::size_t r = 0; r < src.rows; ++r) {
      os << kind << ',' << names[r];
      for (std::size_t c = 0; c < src.cols; ++c) os << ',' << fmt_double(src(r, c));
      os << '\n';
    }
  }
  write_text_file(path, os.str());
}

}  // namespace

// ---- config ----

void PipelineConfig::validate() const {
  if (ingest.source == DatasetSource::Synthetic) ingest.synthetic.validate();
  if (ingest.window_length < 2) throw ConfigError("dataset.window_length must be >= 2");
  if (!(ingest.overlap >= 0.0 && ingest.overlap < 1.0)) throw ConfigError("dataset.overlap must lie in [0, 1)");
  if (!(ingest.train_fraction > 0.0 && ingest.train_fraction < 1.0))
    throw ConfigError("dataset.train_fraction must lie in (0, 1)");
  const std::size_t t = ingest.source == DatasetSource::Synthetic ? ingest.synthetic.timesteps : ingest.window_length;
  const std::size_t d = ingest.source == DatasetSource::Synthetic ? ingest.synthetic.channels : kImuChannels;
  autoencoder.validate(t, d);
  cgf.validate();
  classifier.validate();
}

Json PipelineConfig::to_json() const {
  Json ds;
  ds["source"] = ingest.source == DatasetSource::Uah ? "uah" : "synthetic";
  ds["root"] = ingest.root.string();
  ds["road"] = ingest.road ? std::string(to_string(*ingest.road)) : std::string("ALL");
  ds["columns"] = {{"file", ingest.columns.file_name},
                   {"timestamp", ingest.columns.timestamp},
                   {"channels", ingest.columns.channels}};
  ds["window_length"] = ingest.window_length;
  ds["overlap"] = ingest.overlap;
  ds["train_fraction"] = ingest.train_fraction;
  ds["seed"] = ingest.seed;
  ds["synthetic"] = synthetic_to_json(ingest.synthetic);
  Json j;
  j["output_dir"] = output_dir.string();
  j["dataset"] = ds;
  j["autoencoder"] = {{"hidden1", autoencoder.hidden1},
                      {"hidden2", autoencoder.hidden2},
                      {"epochs", autoencoder.epochs},
                      {"batch_size", autoencoder.batch_size},
                      {"learning_rate", autoencoder.learning_rate},
                      {"beta1", autoencoder.beta1},
                      {"beta2", autoencoder.beta2},
                      {"epsilon", autoencoder.epsilon},
                      {"early_stop_patience", autoencoder.early_stop_patience},
                      {"validation_fraction", autoencoder.validation_fraction},
                      {"clip_norm", autoencoder.clip_norm},
                      {"seed", autoencoder.seed}};
  j["cgf"] = {{"tau", cgf.tau},
              {"k_start", cgf.k_start},
              {"k_max", cgf.k_max ? Json(*cgf.k_max) : Json(nullptr)},
              {"linkage", to_string(cgf.linkage)},
              {"reselect_measure_per_k", cgf.reselect_measure_per_k}};
  j["classifier"] = {{"kind", to_string(classifier.kind)},
                     {"learning_rate", classifier.learning_rate},
                     {"epochs", classifier.epochs},
                     {"l2", classifier.l2},
                     {"seed", classifier.seed}};
  j["mapping"] = {{"method", to_string(mapping)}};
  j["baseline"] = train_baseline;
  return j;
}

PipelineConfig PipelineConfig::from_json(const Json& j) {
  PipelineConfig c;
  check_keys(j, {"output_dir", "dataset", "autoencoder", "cgf", "classifier", "mapping", "baseline"}, "config");
  std::string out = c.output_dir.string();
  read(j, "output_dir", out, "config");
  c.output_dir = out;
  read(j, "baseline", c.train_baseline, "config");

  if (j.contains("dataset")) {
    const Json& d = j.at("dataset");
    const std::string w = "dataset";
    check_keys(d, {"source", "root", "road", "columns", "window_length", "overlap", "train_fraction", "seed", "synthetic"}, w);
    const std::string source = read_token(d, "source", "synthetic", w);
    if (source == "uah") {
      c.ingest.source = DatasetSource::Uah;
    } else if (source == "synthetic") {
      c.ingest.source = DatasetSource::Synthetic;
    } else {
      throw ConfigError("dataset.source must be 'uah' or 'synthetic'");
    }
    std::string root;
    read(d, "root", root, w);
    c.ingest.root = root;
    const std::string road = read_token(d, "road", "MOTORWAY", w);
    c.ingest.road = road == "ALL" ? std::nullopt : std::optional<Road>(parse_road(road));
    if (d.contains("columns")) {
      const Json& cm = d.at("columns");
      check_keys(cm, {"file", "timestamp", "channels"}, "dataset.columns");
      read(cm, "file", c.ingest.columns.file_name, "dataset.columns");
      read(cm, "timestamp", c.ingest.columns.timestamp, "dataset.columns");
      read(cm, "channels", c.ingest.columns.channels, "dataset.columns");
    }
    read(d, "window_length", c.ingest.window_length, w);
    read(d, "overlap", c.ingest.overlap, w);
    read(d, "train_fraction", c.ingest.train_fraction, w);
    read(d, "seed", c.ingest.seed, w);
    if (d.contains("synthetic")) c.ingest.synthetic = synthetic_from_json(d.at("synthetic"));
  }

  if (j.contains("autoencoder")) {
    const Json& a = j.at("autoencoder");
    const std::string w = "autoencoder";
    check_keys(a, {"hidden1", "hidden2", "epochs", "batch_size", "learning_rate", "beta1", "beta2", "epsilon",
                   "early_stop_patience", "validation_fraction", "clip_norm", "seed"}, w);
    read(a, "hidden1", c.autoencoder.hidden1, w);
    read(a, "hidden2", c.autoencoder.hidden2, w);
    read(a, "epochs", c.autoencoder.epochs, w);
    read(a, "batch_size", c.autoencoder.batch_size, w);
    read(a, "learning_rate", c.autoencoder.learning_rate, w);
    read(a, "beta1", c.autoencoder.beta1, w);
    read(a, "beta2", c.autoencoder.beta2, w);
    read(a, "epsilon", c.autoencoder.epsilon, w);
    read(a, "early_stop_patience", c.autoencoder.early_stop_patience, w);
    read(a, "validation_fraction", c.autoencoder.validation_fraction, w);
    read(a, "clip_norm", c.autoencoder.clip_norm, w);
    read(a, "seed", c.autoencoder.seed, w);
  }
  if (j.contains("cgf")) {
    const Json& g = j.at("cgf");
    const std::string w = "cgf";
    check_keys(g, {"tau", "k_start", "k_max", "linkage", "reselect_measure_per_k"}, w);
    read(g, "tau", c.cgf.tau, w);
    read(g, "k_start", c.cgf.k_start, w);
    if (g.contains("k_max") && !g.at("k_max").is_null()) {
      std::size_t k = 0;
      read(g, "k_max", k, w);
      c.cgf.k_max = k;
    }
    c.cgf.linkage = parse_linkage(read_token(g, "linkage", "AVERAGE", w));
    read(g, "reselect_measure_per_k", c.cgf.reselect_measure_per_k, w);
  }
  if (j.contains("classifier")) {
    const Json& k = j.at("classifier");
    const std::string w = "classifier";
    check_keys(k, {"kind", "learning_rate", "epochs", "l2", "seed"}, w);
    c.classifier.kind = parse_classifier_kind(read_token(k, "kind", "SOFTMAX_STATS", w));
    read(k, "learning_rate", c.classifier.learning_rate, w);
    read(k, "epochs", c.classifier.epochs, w);
    read(k, "l2", c.classifier.l2, w);
    read(k, "seed", c.classifier.seed, w);
  }
  if (j.contains("mapping")) {
    const Json& m = j.at("mapping");
    check_keys(m, {"method"}, "mapping");
    c.mapping = parse_mapping_method(read_token(m, "method", "AVG", "mapping"));
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return PipelineConfig::from_json(j);
}

// ---- serialization helpers ----

void save_aecs(const fs::path& path, const AecsMatrix& aecs) {
  Json header{{"format", "cgrl-aecs"}, {"version", 1}, {"rows", aecs.size()}, {"cols", aecs.dim()},
              {"source_model_id", aecs.source_model_id}};
  write_container(path, kAecsMagic, header, aecs.vectors.data);
}

AecsMatrix load_aecs(const fs::path& path) {
  Container c = read_container(path, kAecsMagic);
  AecsMatrix a;
  try {
    a.vectors = Matrix(c.header.at("rows").get<std::size_t>(), c.header.at("cols").get<std::size_t>());
    a.source_model_id = c.header.at("source_model_id");
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed representation header in " + path.string() + ": " + e.what());
  }
  if (c.payload.size() != a.vectors.data.size()) throw IoError("representation size mismatch in " + path.string());
  a.vectors.data = std::move(c.payload);
  return a;
}

Json cgf_result_to_json(const CgfResult& r, double tau) {
  Json hubert = Json::object();
  for (const auto& [m, rho] : r.hubert.rho) hubert[std::string(to_string(m))] = rho;
  Json trace = Json::array();
  for (const auto& s : r.trace)
    trace.push_back({{"k", s.k}, {"new_group_size", s.new_group_size}, {"stopped", s.stopped},
                     {"measure", to_string(s.measure)}});
  return {{"K", r.grouping.group_count},
          {"measure", to_string(r.measure)},
          {"tau", tau},
          {"hubert", {{"k", r.hubert.k}, {"rho", hubert}, {"selected", to_string(r.hubert.selected)}}},
          {"group_sizes", r.grouping.group_sizes()},
          {"trace", trace},
          {"hit_k_max", r.hit_k_max},
          {"dendrogram_fingerprint", r.dendrogram_fingerprint},
          {"dendrogram_monotonicity_violations", r.dendrogram.monotonicity_violations},
          {"mahalanobis_fingerprint", r.mahalanobis.source_fingerprint},
          {"assignment", r.grouping.assignment}};
}

Json mapping_report_to_json(const MappingReport& r) {
  Json groups = Json::array();
  for (const auto& g : r.groups)
    groups.push_back({{"test_group", g.test_group}, {"train_group", g.train_group}, {"candidates", g.candidates}});
  return {{"method", to_string(r.method)},
          {"measure", to_string(r.measure)},
          {"mahalanobis_fingerprint", r.mahalanobis_fingerprint},
          {"groups", groups}};
}

Json metrics_to_json(const ClassMetrics& m, const std::vector<std::string>& class_names) {
  return {{"accuracy", m.accuracy},
          {"f1_weighted", m.f1_weighted},
          {"f1_macro", m.f1_macro},
          {"f1_per_class", m.f1_per_class},
          {"class_names", class_names},
          {"confusion", matrix_to_json(m.confusion)},
          {"confusion_row_normalized", matrix_to_json(m.confusion_row_normalized)}};
}

void verify_stage_digests(const fs::path& run_dir, const std::string& stage) {
  const fs::path manifest_path = run_dir / run_files::kManifest;
  if (!fs::exists(manifest_path)) throw IoError("no run manifest in " + run_dir.string());
  const Json manifest = read_json(manifest_path);
  if (!manifest.contains("stages") || !manifest["stages"].contains(stage))
    throw IoError("run manifest has no '" + stage + "' stage; run it first");
  for (const Json& a : manifest["stages"][stage].at("artifacts")) {
    const fs::path p = run_dir / a.at("path").get<std::string>();
    if (!fs::exists(p)) throw IoError("artifact missing: " + p.string());
    if (sha256_file(p) != a.at("sha256").get<std::string>()) throw IoError("artifact digest mismatch: " + p.string());
  }
}

Matrix pca_2d(const Matrix& points) {
  Matrix out(points.rows, 2);
  if (points.rows == 0 || points.cols == 0) return out;
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> X(
      points.data.data(), static_cast<Eigen::Index>(points.rows), static_cast<Eigen::Index>(points.cols));
  const Eigen::MatrixXd centred = X.rowwise() - X.colwise().mean();
  const Eigen::MatrixXd cov = centred.transpose() * centred / std::max<double>(1.0, static_cast<double>(points.rows) - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::Index n = cov.rows();
  for (Eigen::Index comp = 0; comp < std::min<Eigen::Index>(2, n); ++comp) {
    Eigen::VectorXd v = eig.eigenvectors().col(n - 1 - comp);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    const Eigen::VectorXd proj = centred * v;
    for (std::size_t r = 0; r < points.rows; ++r) out(r, static_cast<std::size_t>(comp)) = proj(static_cast<Eigen::Index>(r));
  }
  return out;
}

// ---- commands ----

IngestSummary cmd_ingest(const PipelineConfig& config) {
  const fs::path run = config.output_dir;
  RunLock lock(run);
  StageRecorder rec(run, "ingest");
  Json parse_report;
  WindowedDataset all;
  std::vector<int> archetype;

  if (config.ingest.source == DatasetSource::Uah) {
    if (config.ingest.root.empty() || !fs::is_directory(config.ingest.root))
      throw IoError("dataset root does not exist: " + config.ingest.root.string());
    CorpusReport report;
    std::vector<std::string> warnings;
    all = rec.timed("parse", [&] {
      auto sessions = parse_uah_corpus(config.ingest.root, config.ingest.columns, config.ingest.road, report);
      return window_sessions(sessions, config.ingest.window_length, config.ingest.overlap, &warnings);
    });
    report.warnings.insert(report.warnings.end(), warnings.begin(), warnings.end());
    parse_report = {{"source", "uah"},
                    {"sessions_found", report.sessions_found},
                    {"sessions_kept", report.sessions_kept},
                    {"rejected_rows", report.rejected_rows},
                    {"windows", all.size()},
                    {"warnings", report.warnings}};
    if (all.size() == 0) throw IoError("corpus produced no windows");
  } else {
    SyntheticDataset syn = rec.timed("generate", [&] { return generate_synthetic(config.ingest.synthetic); });
    all = std::move(syn.data);
    archetype = std::move(syn.archetype);
    parse_report = {{"source", "synthetic"}, {"windows", all.size()}, {"archetypes", config.ingest.synthetic.archetypes.size()}};
  }

  const SplitIndices split = stratified_split_indices(all, config.ingest.train_fraction, config.ingest.seed);
  WindowedDataset train = all.subset(split.train);
  WindowedDataset test = all.subset(split.test);
  const NormalizationStats stats = fit_normalization(train);
  apply_normalization(train, stats);
  apply_normalization(test, stats);
  parse_report["train_windows"] = train.size();
  parse_report["test_windows"] = test.size();

  save_dataset(run / run_files::kTrainData, train, stats);
  save_dataset(run / run_files::kTestData, test, stats);
  write_json(run / run_files::kParseReport, parse_report);
  rec.artifact(run_files::kTrainData);
  rec.artifact(run_files::kTestData);
  rec.artifact(run_files::kParseReport);
  if (!archetype.empty()) {
    std::ostringstream os;
    os << "split,index,archetype\n";
    for (std::size_t i = 0; i < split.train.size(); ++i) os << "train," << i << ',' << archetype[split.train[i]] << '\n';
    for (std::size_t i = 0; i < split.test.size(); ++i) os << "test," << i << ',' << archetype[split.test[i]] << '\n';
    write_text_file(run / run_files::kArchetypes, os.str());
    rec.artifact(run_files::kArchetypes);
  }
  rec.commit(config);
  return {train.size(), test.size(), train.timesteps, train.channels, train.class_count()};
}

TrainSummary cmd_train(const PipelineConfig& config, bool baseline_only) {
  const fs::path run = config.output_dir;
  RunLock lock(run);
  StageRecorder rec(run, "train");
  if (!fs::exists(run / run_files::kTrainData)) throw IoError("canonical train file missing; run ingest first");
  const auto [train, stats] = load_dataset(run / run_files::kTrainData);

  FitResult fitted = rec.timed("autoencoder", [&] { return fit(train, config.autoencoder); });
  save_model(run / run_files::kModel, fitted.params, config.autoencoder, train.timesteps);
  write_json(run / run_files::kTrainReport, train_report_to_json(fitted.report));
  const AecsMatrix aecs = rec.timed("transform", [&] { return transform(fitted.params, train); });
  save_aecs(run / run_files::kTrainAecs, aecs);
  rec.artifact(run_files::kModel);
  rec.artifact(run_files::kTrainReport);
  rec.artifact(run_files::kTrainAecs);

  TrainSummary summary;
  summary.baseline_only = baseline_only;
  Json extra = Json::object();
  Json timing_detail = Json::object();
  timing_detail["autoencoder_epoch_seconds"] = fitted.report.epoch_seconds;
  extra["autoencoder_timing"] = timing_detail;

  if (!baseline_only) {
    const CgfResult cgf = rec.timed("cgf", [&] { return form_consistent_groups(aecs, config.cgf); });
    write_json(run / run_files::kTrainCgf, cgf_result_to_json(cgf, config.cgf.tau));
    const GroupModelBundle bundle = rec.timed("classifiers", [&] {
      return train_per_group(train, aecs, cgf.grouping, config.classifier);
    });
    save_bundle(run / run_files::kBundle, bundle);
    rec.artifact(run_files::kTrainCgf);
    rec.artifact(run_files::kBundle);
    summary.groups = cgf.grouping.group_count;
    summary.measure = cgf.measure;
    summary.group_sizes = cgf.grouping.group_sizes();
    for (const auto& w : bundle.warnings) std::cerr << "train: " << w << '\n';
  } else {
    std::error_code ec;
    fs::remove(run / run_files::kTrainCgf, ec);
    fs::remove(run / run_files::kBundle, ec);
  }
  if (baseline_only || config.train_baseline) {
    const GroupModelBundle baseline = rec.timed("baseline", [&] {
      return train_single_baseline(train, aecs, config.classifier);
    });
    save_bundle(run / run_files::kBaseline, baseline);
    rec.artifact(run_files::kBaseline);
  }
  rec.commit(config, extra);
  return summary;
}

InferSummary cmd_infer(const PipelineConfig& config) {
  const fs::path run = config.output_dir;
  RunLock lock(run);
  verify_stage_digests(run, "train");
  StageRecorder rec(run, "infer");
  if (!fs::exists(run / run_files::kTestData)) throw IoError("canonical test file missing; run ingest first");

  const LoadedModel model = load_model(run / run_files::kModel);
  const auto [test, stats] = load_dataset(run / run_files::kTestData);
  const AecsMatrix train_aecs = load_aecs(run / run_files::kTrainAecs);
  if (train_aecs.source_model_id != model.id) throw IoError("train representations were not produced by the saved model");
  const AecsMatrix test_aecs = rec.timed("transform", [&] { return transform(model.params, test); });
  save_aecs(run / run_files::kTestAecs, test_aecs);
  rec.artifact(run_files::kTestAecs);

  InferSummary summary;
  Json metrics_json = Json::object();
  const bool labeled = test.labeled;

  if (fs::exists(run / run_files::kBundle)) {
    const GroupModelBundle bundle = load_bundle(run / run_files::kBundle);
    if (bundle.aecs_model_id != model.id) throw IoError("model bundle does not match the saved autoencoder");
    const Json train_cgf = read_json(run / run_files::kTrainCgf);
    const Grouping train_grouping = grouping_from_cgf_json(train_cgf);

    const MahalanobisContext ctx = fit_mahalanobis(train_aecs);
    if (ctx.source_fingerprint != train_cgf.at("mahalanobis_fingerprint").get<std::string>())
      throw IoError("train Mahalanobis context does not reproduce the stored fingerprint");
    TrainReference ref{&train_aecs, train_grouping.assignment, train_grouping.group_count, train_grouping.measure, &ctx};

    Grouping test_grouping = Grouping::single_group(test.size());
    Json test_cgf_json;
    if (test.size() >= 3) {
      CgfResult test_cgf = rec.timed("cgf", [&] { return form_consistent_groups(test_aecs, config.cgf); });
      test_cgf_json = cgf_result_to_json(test_cgf, config.cgf.tau);
      test_grouping = test_cgf.grouping;
    } else {
      test_cgf_json = {{"K", 1}, {"assignment", test_grouping.assignment}, {"note", "fewer than three test windows"}};
    }
    write_json(run / run_files::kTestCgf, test_cgf_json);
    rec.artifact(run_files::kTestCgf);
    summary.test_groups = test_grouping.group_count;

    const MappingReport cr = build_mapping(ref, test_aecs, test_grouping, MappingMethod::CrCr);
    const MappingReport avg = build_mapping(ref, test_aecs, test_grouping, MappingMethod::Avg);
    const auto pred_cr = predict_with_mapping(bundle, cr, test, test_aecs);
    const auto pred_avg = predict_with_mapping(bundle, avg, test, test_aecs);
    for (const auto& g : cr.groups) summary.mapping_cr_cr.push_back(g.train_group);
    for (const auto& g : avg.groups) summary.mapping_avg.push_back(g.train_group);

    const MappingReport& chosen = config.mapping == MappingMethod::CrCr ? cr : avg;
    const auto& pred = config.mapping == MappingMethod::CrCr ? pred_cr : pred_avg;
    write_json(run / run_files::kMappingReport,
               {{"configured_method", to_string(config.mapping)},
                {"train_measure", to_string(train_grouping.measure)},
                {"test_groups", test_grouping.group_count},
                {"reports", Json::array({mapping_report_to_json(cr), mapping_report_to_json(avg)})}});
    write_predictions(run / run_files::kPredictions, test, pred, &chosen);
    rec.artifact(run_files::kMappingReport);
    rec.artifact(run_files::kPredictions);

    if (labeled) {
      summary.grouped_cr_cr = evaluate_metrics(pred_cr, test.labels, test.class_count());
      summary.grouped_avg = evaluate_metrics(pred_avg, test.labels, test.class_count());
      summary.grouped = config.mapping == MappingMethod::CrCr ? summary.grouped_cr_cr : summary.grouped_avg;
      metrics_json["grouped"] = {{"CR_CR", metrics_to_json(*summary.grouped_cr_cr, test.class_names)},
                                 {"AVG", metrics_to_json(*summary.grouped_avg, test.class_names)}};
      metrics_json["headline_method"] = to_string(config.mapping);
      write_confusion_csv(run / "infer/confusion_grouped.csv", *summary.grouped, test.class_names);
      rec.artifact("infer/confusion_grouped.csv");
    }
  }

  if (fs::exists(run / run_files::kBaseline)) {
    const GroupModelBundle baseline = load_bundle(run / run_files::kBaseline);
    if (baseline.aecs_model_id != model.id) throw IoError("baseline bundle does not match the saved autoencoder");
    const auto pred = predict(baseline, 0, test, test_aecs);
    write_predictions(run / run_files::kBaselinePredictions, test, pred, nullptr);
    rec.artifact(run_files::kBaselinePredictions);
    if (labeled) {
      summary.baseline = evaluate_metrics(pred, test.labels, test.class_count());
      metrics_json["baseline"] = metrics_to_json(*summary.baseline, test.class_names);
      write_confusion_csv(run / "infer/confusion_baseline.csv", *summary.baseline, test.class_names);
      rec.artifact("infer/confusion_baseline.csv");
    }
  }

  if (labeled && (summary.grouped || summary.baseline)) {
    if (summary.grouped && summary.baseline) {
      metrics_json["delta"] = {{"accuracy", summary.grouped->accuracy - summary.baseline->accuracy},
                               {"f1_weighted", summary.grouped->f1_weighted - summary.baseline->f1_weighted},
                               {"f1_macro", summary.grouped->f1_macro - summary.baseline->f1_macro}};
    }
    write_json(run / run_files::kMetrics, metrics_json);
    rec.artifact(run_files::kMetrics);
  }
  rec.commit(config);
  return summary;
}

ReportSummary cmd_report(const fs::path& run_dir) {
  RunLock lock(run_dir);
  const fs::path manifest_path = run_dir / run_files::kManifest;
  if (!fs::exists(manifest_path)) throw IoError("no run manifest in " + run_dir.string());
  const PipelineConfig config = PipelineConfig::from_json(read_json(manifest_path).at("config"));
  StageRecorder rec(run_dir, "report");
  ReportSummary summary;

  struct Split {
    const char* name;
    const char* data;
    const char* aecs;
    const char* cgf;
  };
  const Split splits[] = {{"train", run_files::kTrainData, run_files::kTrainAecs, run_files::kTrainCgf},
                          {"test", run_files::kTestData, run_files::kTestAecs, run_files::kTestCgf}};
  std::ostringstream hubert;
  hubert << "split,measure,rho,selected\n";

  for (const Split& s : splits) {
    if (!fs::exists(run_dir / s.data) || !fs::exists(run_dir / s.aecs) || !fs::exists(run_dir / s.cgf)) {
      std::cerr << "report: " << s.name << " artifacts incomplete, skipped\n";
      continue;
    }
    const auto [ds, stats] = load_dataset(run_dir / s.data);
    const AecsMatrix aecs = load_aecs(run_dir / s.aecs);
    const Json cgf = read_json(run_dir / s.cgf);
    const auto assignment = cgf.at("assignment").get<std::vector<int>>();
    if (assignment.size() != ds.size() || aecs.size() != ds.size())
      throw IoError(std::string("report: ") + s.name + " artifacts disagree on instance count");

    if (!ds.meta.empty()) {
      std::map<std::pair<int, std::string>, std::vector<std::size_t>> counts;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        auto& row = counts[{assignment[i], ds.meta[i].driver_id}];
        row.resize(ds.class_count(), 0);
        ++row[static_cast<std::size_t>(ds.labels[i])];
      }
      std::ostringstream os;
      os << "group,driver";
      for (const auto& n : ds.class_names) os << ',' << n;
      os << ",total\n";
      for (const auto& [key, row] : counts) {
        os << key.first << ',' << key.second;
        std::size_t total = 0;
        for (std::size_t c : row) {
          os << ',' << c;
          total += c;
        }
        os << ',' << total << '\n';
      }
      const std::string rel = std::string("report/composition_") + s.name + ".csv";
      write_text_file(run_dir / rel, os.str());
      rec.artifact(rel.c_str());
      summary.files.push_back(run_dir / rel);
    } else {
      std::cerr << "report: " << s.name << " data carries no metadata; composition table skipped\n";
    }

    const Matrix coords = pca_2d(aecs.vectors);
    std::ostringstream pca;
    pca << "index,pc1,pc2,group\n";
    for (std::size_t i = 0; i < coords.rows; ++i)
      pca << i << ',' << fmt_double(coords(i, 0)) << ',' << fmt_double(coords(i, 1)) << ',' << assignment[i] << '\n';
    const std::string rel = std::string("report/pca_") + s.name + ".csv";
    write_text_file(run_dir / rel, pca.str());
    rec.artifact(rel.c_str());
    summary.files.push_back(run_dir / rel);

    if (cgf.contains("hubert")) {
      const std::string selected = cgf["hubert"].at("selected");
      for (const auto& item : cgf["hubert"].at("rho").items())
        hubert << s.name << ',' << item.key() << ',' << fmt_double(item.value().get<double>()) << ','
               << (item.key() == selected ? 1 : 0) << '\n';
    }
  }
  write_text_file(run_dir / "report/hubert.csv", hubert.str());
  rec.artifact("report/hubert.csv");
  summary.files.push_back(run_dir / "report/hubert.csv");
  rec.commit(config);
  return summary;
}

}  // namespace cgrl

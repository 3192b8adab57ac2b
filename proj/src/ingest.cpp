#include "cgrl/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "cgrl/container.hpp"

namespace cgrl {
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kDatasetMagic = "CGDSv1";

std::vector<std::string_view> split_tokens(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == sep || (sep == ' ' && (line[pos] == '\t' || line[pos] == '\r'))))
      ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && !(line[end] == sep || (sep == ' ' && (line[end] == '\t' || line[end] == '\r'))))
      ++end;
    out.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

std::optional<double> parse_double(std::string_view tok) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

}  // namespace

std::string_view to_string(Behavior b) {
  switch (b) {
    case Behavior::Normal: return "NORMAL";
    case Behavior::Aggressive: return "AGGRESSIVE";
    case Behavior::Drowsy: return "DROWSY";
  }
  return "UNKNOWN";
}

std::string_view to_string(Road r) { return r == Road::Motorway ? "MOTORWAY" : "SECONDARY"; }

Road parse_road(std::string_view token) {
  if (token == "MOTORWAY") return Road::Motorway;
  if (token == "SECONDARY") return Road::Secondary;
  throw ConfigError("unknown road token: " + std::string(token));
}

std::vector<std::string> behavior_class_names() { return {"NORMAL", "AGGRESSIVE", "DROWSY"}; }

RawSession parse_uah_session(const fs::path& directory, const ColumnMap& columns) {
  RawSession session;
  session.session_id = directory.filename().string();

  // Directory names look like 20151110175712-16km-D1-NORMAL1-SECONDARY.
  std::optional<Behavior> behavior;
  std::optional<Road> road;
  for (std::string_view tok : split_tokens(session.session_id, '-')) {
    if (tok.size() >= 2 && tok[0] == 'D' &&
        std::all_of(tok.begin() + 1, tok.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      session.driver_id = std::string(tok);
    } else if (starts_with(tok, "NORMAL")) {
      behavior = Behavior::Normal;
    } else if (starts_with(tok, "AGGRESSIVE")) {
      behavior = Behavior::Aggressive;
    } else if (starts_with(tok, "DROWSY")) {
      behavior = Behavior::Drowsy;
    } else if (tok == "MOTORWAY" || tok == "SECONDARY") {
      road = parse_road(tok);
    }
  }
  if (!behavior) throw ConfigError("unrecognized behavior token in session directory: " + session.session_id);
  if (!road) throw ConfigError("unrecognized road token in session directory: " + session.session_id);
  session.behavior = *behavior;
  session.road = *road;
  if (session.driver_id.empty()) session.driver_id = directory.parent_path().filename().string();

  const fs::path file = directory / columns.file_name;
  std::ifstream in(file);
  if (!in) throw IoError("missing raw accelerometer file: " + file.string());

  std::size_t needed = columns.timestamp;
  for (std::size_t c : columns.channels) needed = std::max(needed, c);

  std::string line;
  while (std::getline(in, line)) {
    auto toks = split_tokens(line, ' ');
    if (toks.empty()) continue;
    if (toks.size() <= needed) {
      ++session.rejected_rows;
      continue;
    }
    ImuSample sample;
    bool ok = true;
    if (auto ts = parse_double(toks[columns.timestamp])) {
      sample.timestamp = *ts;
    } else {
      ok = false;
    }
    for (std::size_t ch = 0; ok && ch < kImuChannels; ++ch) {
      if (auto v = parse_double(toks[columns.channels[ch]])) {
        sample.values[ch] = *v;
      } else {
        ok = false;
      }
    }
    if (ok && !session.samples.empty() && sample.timestamp <= session.samples.back().timestamp) ok = false;
    if (!ok) {
      ++session.rejected_rows;
      continue;
    }
    session.samples.push_back(sample);
  }
  if (session.samples.empty()) throw IoError("no valid rows in " + file.string());
  return session;
}

std::vector<RawSession> parse_uah_corpus(const fs::path& root, const ColumnMap& columns,
                                         std::optional<Road> road_filter, CorpusReport& report) {
  if (!fs::is_directory(root)) throw IoError("dataset root is not a directory: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().filename() == columns.file_name)
      dirs.push_back(entry.path().parent_path());
  }
  std::sort(dirs.begin(), dirs.end());
  report.sessions_found = dirs.size();

  std::vector<RawSession> sessions;
  for (const auto& dir : dirs) {
    RawSession s = parse_uah_session(dir, columns);
    report.rejected_rows += s.rejected_rows;
    if (s.rejected_rows > 0)
      report.warnings.push_back(s.session_id + ": rejected " + std::to_string(s.rejected_rows) + " rows");
    if (road_filter && s.road != *road_filter) continue;
    sessions.push_back(std::move(s));
  }
  report.sessions_kept = sessions.size();
  if (sessions.empty()) throw IoError("no sessions found under " + root.string());
  return sessions;
}

std::size_t window_stride_for(std::size_t window_len, double overlap_fraction) {
  if (window_len < 2) throw std::invalid_argument("window length must be >= 2");
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0))
    throw std::invalid_argument("overlap fraction must lie in [0, 1)");
  const auto stride = static_cast<std::size_t>(std::llround(static_cast<double>(window_len) * (1.0 - overlap_fraction)));
  return std::max<std::size_t>(stride, 1);
}

WindowedDataset window_sessions(const std::vector<RawSession>& sessions, std::size_t window_len,
                                double overlap_fraction, std::vector<std::string>* warnings) {
  const std::size_t stride = window_stride_for(window_len, overlap_fraction);
  WindowedDataset ds;
  ds.timesteps = window_len;
  ds.channels = kImuChannels;
  ds.class_names = behavior_class_names();
  for (const RawSession& s : sessions) {
    const std::size_t n = s.samples.size();
    if (n < window_len) {
      if (warnings) warnings->push_back(s.session_id + ": shorter than one window, skipped");
      continue;
    }
    for (std::size_t start = 0; start + window_len <= n; start += stride) {
      for (std::size_t k = 0; k < window_len; ++k) {
        const auto& v = s.samples[start + k].values;
        ds.values.insert(ds.values.end(), v.begin(), v.end());
      }
      ds.labels.push_back(static_cast<int>(s.behavior));
      ds.meta.push_back({s.driver_id, std::string(to_string(s.behavior)), std::string(to_string(s.road)), s.session_id});
    }
  }
  return ds;
}

SplitIndices stratified_split_indices(const WindowedDataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train fraction must lie in (0, 1)");
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.meta.empty()) {
      strata[{"", std::to_string(ds.labels[i])}].push_back(i);
    } else {
      strata[{ds.meta[i].driver_id, ds.meta[i].behavior}].push_back(i);
    }
  }
  Rng rng(seed);
  SplitIndices split;
  for (auto& [key, members] : strata) {
    const std::size_t n = members.size();
    if (n < 2) {
      split.train.insert(split.train.end(), members.begin(), members.end());
      continue;
    }
    std::size_t n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    rng.shuffle(std::span<std::size_t>(members));
    const auto mid = members.begin() + static_cast<std::ptrdiff_t>(n_train);
    split.train.insert(split.train.end(), members.begin(), mid);
    split.test.insert(split.test.end(), mid, members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::pair<WindowedDataset, WindowedDataset> stratified_split(const WindowedDataset& ds, double train_fraction,
                                                             std::uint64_t seed) {
  const SplitIndices split = stratified_split_indices(ds, train_fraction, seed);
  return {ds.subset(split.train), ds.subset(split.test)};
}

NormalizationStats fit_normalization(const WindowedDataset& ds) {
  const std::size_t d = ds.channels;
  NormalizationStats stats{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  const std::size_t rows = ds.size() * ds.timesteps;
  if (rows == 0) return stats;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < d; ++c) stats.mean[c] += ds.values[r * d + c];
  for (double& m : stats.mean) m /= static_cast<double>(rows);
  std::vector<double> var(d, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = ds.values[r * d + c] - stats.mean[c];
      var[c] += diff * diff;
    }
  for (std::size_t c = 0; c < d; ++c) {
    const double sd = std::sqrt(var[c] / static_cast<double>(rows));
    stats.stddev[c] = sd > 1e-12 ? sd : 1.0;
  }
  return stats;
}

void apply_normalization(WindowedDataset& ds, const NormalizationStats& stats) {
  const std::size_t d = ds.channels;
  if (stats.mean.size() != d || stats.stddev.size() != d)
    throw std::invalid_argument("normalization stats do not match channel count");
  for (std::size_t i = 0; i < ds.values.size(); ++i) {
    const std::size_t c = i % d;
    ds.values[i] = (ds.values[i] - stats.mean[c]) / stats.stddev[c];
  }
}

void SyntheticSpec::validate() const {
  if (archetypes.empty()) throw ConfigError("synthetic: need at least one archetype");
  if (windows_per_cell == 0 || timesteps < 2 || channels == 0 || classes == 0)
    throw ConfigError("synthetic: counts must be positive (timesteps >= 2)");
  if (!(sample_rate_hz > 0.0)) throw ConfigError("synthetic: sample rate must be positive");
  if (!(std::abs(ar_coefficient) < 1.0)) throw ConfigError("synthetic: AR coefficient must satisfy |phi| < 1");
  for (const auto& a : archetypes) {
    if (!(a.noise_sigma >= 0.0)) throw ConfigError("synthetic: noise sigma must be >= 0");
    if (!(a.base_frequency_hz >= 0.0)) throw ConfigError("synthetic: base frequency must be >= 0");
  }
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticDataset out;
  WindowedDataset& ds = out.data;
  ds.timesteps = spec.timesteps;
  ds.channels = spec.channels;
  for (std::size_t c = 0; c < spec.classes; ++c) ds.class_names.push_back("CLASS" + std::to_string(c));

  Rng rng(spec.seed);
  const double centre = (static_cast<double>(spec.classes) - 1.0) / 2.0;
  const double stationary = 1.0 / std::sqrt(1.0 - spec.ar_coefficient * spec.ar_coefficient);
  std::vector<double> noise(spec.channels);

  for (std::size_t a = 0; a < spec.archetypes.size(); ++a) {
    const SyntheticArchetype& arch = spec.archetypes[a];
    for (std::size_t c = 0; c < spec.classes; ++c) {
      const double effect = arch.class_effect_sign * (static_cast<double>(c) - centre);
      const double freq = std::max(0.0, arch.base_frequency_hz + spec.class_frequency_shift * effect);
      const double offset = spec.class_mean_shift * effect;
      for (std::size_t w = 0; w < spec.windows_per_cell; ++w) {
        for (std::size_t ch = 0; ch < spec.channels; ++ch)
          noise[ch] = arch.noise_sigma * stationary * rng.normal();
        for (std::size_t s = 0; s < spec.timesteps; ++s) {
          const double time = static_cast<double>(s) / spec.sample_rate_hz;
          for (std::size_t ch = 0; ch < spec.channels; ++ch) {
            if (s > 0) noise[ch] = spec.ar_coefficient * noise[ch] + arch.noise_sigma * rng.normal();
            const double phase = std::numbers::pi * static_cast<double>(ch) / static_cast<double>(spec.channels);
            ds.values.push_back(arch.amplitude * std::sin(2.0 * std::numbers::pi * freq * time + phase) + offset +
                                noise[ch]);
          }
        }
        ds.labels.push_back(static_cast<int>(c));
        ds.meta.push_back({"A" + std::to_string(a), ds.class_names[c], "SYNTHETIC",
                           "A" + std::to_string(a) + "-" + ds.class_names[c]});
        out.archetype.push_back(static_cast<int>(a));
      }
    }
  }
  return out;
}

SyntheticSpec xor_synthetic_spec(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.archetypes = {
      {.base_frequency_hz = 0.25, .amplitude = 1.0, .noise_sigma = 0.15, .class_effect_sign = 1.0},
      {.base_frequency_hz = 2.0, .amplitude = 3.0, .noise_sigma = 0.15, .class_effect_sign = -1.0},
  };
  spec.windows_per_cell = 80;
  spec.timesteps = 32;
  spec.channels = 3;
  spec.classes = 2;
  spec.class_mean_shift = 1.0;
  spec.seed = seed;
  return spec;
}

SyntheticSpec three_archetype_synthetic_spec(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.archetypes = {
      {.base_frequency_hz = 0.3, .amplitude = 1.0, .noise_sigma = 0.15, .class_effect_sign = 1.0},
      {.base_frequency_hz = 1.5, .amplitude = 2.0, .noise_sigma = 0.15, .class_effect_sign = -1.0},
      {.base_frequency_hz = 3.0, .amplitude = 0.5, .noise_sigma = 0.15, .class_effect_sign = 1.0},
  };
  spec.seed = seed;
  return spec;
}

void save_dataset(const fs::path& path, const WindowedDataset& ds, const std::optional<NormalizationStats>& normalization) {
  Json header;
  header["format"] = "cgrl-dataset";
  header["version"] = 1;
  header["M"] = ds.size();
  header["t"] = ds.timesteps;
  header["d"] = ds.channels;
  header["C"] = ds.class_count();
  header["class_names"] = ds.class_names;
  header["labeled"] = ds.labeled;
  header["labels"] = ds.labels;
  if (normalization) {
    header["normalization"] = {{"mean", normalization->mean}, {"stddev", normalization->stddev}};
  } else {
    header["normalization"] = nullptr;
  }
  Json meta = Json::array();
  for (const auto& m : ds.meta)
    meta.push_back({{"driver_id", m.driver_id}, {"behavior", m.behavior}, {"road", m.road}, {"session_id", m.session_id}});
  header["meta"] = std::move(meta);
  write_container(path, kDatasetMagic, header, ds.values);
}

std::pair<WindowedDataset, std::optional<NormalizationStats>> load_dataset(const fs::path& path) {
  Container c = read_container(path, kDatasetMagic);
  const Json& h = c.header;
  WindowedDataset ds;
  std::optional<NormalizationStats> stats;
  try {
    if (h.at("format") != "cgrl-dataset") throw IoError("not a dataset archive: " + path.string());
    ds.timesteps = h.at("t").get<std::size_t>();
    ds.channels = h.at("d").get<std::size_t>();
    ds.class_names = h.at("class_names").get<std::vector<std::string>>();
    ds.labels = h.at("labels").get<std::vector<int>>();
    ds.labeled = h.value("labeled", true);
    for (const auto& m : h.at("meta"))
      ds.meta.push_back({m.at("driver_id"), m.at("behavior"), m.at("road"), m.at("session_id")});
    if (!h.at("normalization").is_null()) {
      stats = NormalizationStats{h["normalization"].at("mean").get<std::vector<double>>(),
                                 h["normalization"].at("stddev").get<std::vector<double>>()};
    }
    if (h.at("M").get<std::size_t>() != ds.labels.size()) throw IoError("dataset header M mismatch: " + path.string());
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed dataset header in " + path.string() + ": " + e.what());
  }
  ds.values = std::move(c.payload);
  ds.validate();
  return {std::move(ds), std::move(stats)};
}

}  // namespace cgrl

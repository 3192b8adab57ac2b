#include "oracle/fixtures.hpp"

namespace fixtures {

Labeled planted_blobs(const std::vector<std::size_t>& sizes, std::size_t dim, double separation, std::uint64_t seed) {
  cgrl::Rng rng(seed);
  std::size_t total = 0;
  for (std::size_t s : sizes) total += s;
  Labeled out;
  out.aecs.vectors = cgrl::Matrix(total, dim);
  out.aecs.source_model_id = "fixture";
  std::size_t r = 0;
  for (std::size_t b = 0; b < sizes.size(); ++b) {
    for (std::size_t i = 0; i < sizes[b]; ++i, ++r) {
      for (std::size_t c = 0; c < dim; ++c) out.aecs.vectors(r, c) = rng.normal() + (c == b ? separation : 0.0);
      out.truth.push_back(static_cast<int>(b));
    }
  }
  return out;
}

Labeled anisotropic_strips(std::uint64_t seed) {
  cgrl::Rng rng(seed);
  constexpr std::size_t kPerStrip = 30;
  constexpr double kScale = 0.01;
  Labeled out;
  out.aecs.vectors = cgrl::Matrix(2 * kPerStrip, 2);
  out.aecs.source_model_id = "fixture";
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t i = 0; i < kPerStrip; ++i) {
      const std::size_t r = s * kPerStrip + i;
      out.aecs.vectors(r, 0) = kScale * rng.uniform(-10.0, 10.0);
      out.aecs.vectors(r, 1) = kScale * ((s == 0 ? -1.0 : 1.0) + 0.05 * rng.normal());
      out.truth.push_back(static_cast<int>(s));
    }
  }
  return out;
}

Labeled isotropic_line_blobs(std::uint64_t seed) {
  cgrl::Rng rng(seed);
  constexpr std::size_t kPerBlob = 25;
  Labeled out;
  out.aecs.vectors = cgrl::Matrix(2 * kPerBlob, 1);
  out.aecs.source_model_id = "fixture";
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t i = 0; i < kPerBlob; ++i) {
      out.aecs.vectors(b * kPerBlob + i, 0) = 10.0 * static_cast<double>(b) + 0.5 * rng.normal();
      out.truth.push_back(static_cast<int>(b));
    }
  }
  return out;
}

cgrl::AecsMatrix uniform_cloud(std::size_t m, std::size_t dim, std::uint64_t seed) {
  cgrl::Rng rng(seed);
  return random_points(m, dim, rng);
}

cgrl::AecsMatrix random_points(std::size_t m, std::size_t dim, cgrl::Rng& rng) {
  cgrl::AecsMatrix out;
  out.vectors = cgrl::Matrix(m, dim);
  out.source_model_id = "fixture";
  for (double& v : out.vectors.data) v = rng.uniform(-1.0, 1.0);
  return out;
}

cgrl::WindowedDataset random_dataset(std::size_t m, std::size_t t, std::size_t d, std::size_t classes,
                                     std::uint64_t seed) {
  cgrl::Rng rng(seed);
  cgrl::WindowedDataset ds;
  ds.timesteps = t;
  ds.channels = d;
  for (std::size_t c = 0; c < classes; ++c) ds.class_names.push_back("C" + std::to_string(c));
  ds.values.resize(m * t * d);
  for (double& v : ds.values) v = rng.normal();
  for (std::size_t i = 0; i < m; ++i) ds.labels.push_back(static_cast<int>(rng.index(classes)));
  return ds;
}

}  // namespace fixtures

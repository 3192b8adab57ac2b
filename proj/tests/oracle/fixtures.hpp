#pragma once

#include <cstdint>
#include <vector>

#include "cgrl/core.hpp"
#include "cgrl/ingest.hpp"

namespace fixtures {

struct Labeled {
  cgrl::AecsMatrix aecs;
  std::vector<int> truth;
};

// Gaussian blobs of the given sizes in `dim` dimensions, unit sigma. Blob b is
// centred at `separation` along axis b, so centres are separation*sqrt(2) apart.
Labeled planted_blobs(const std::vector<std::size_t>& sizes, std::size_t dim, double separation, std::uint64_t seed);

// Two horizontal strips: x spans a wide range, y carries the class. Scaled down so
// raw Chebyshev and Manhattan values are small while Mahalanobis is scale free.
Labeled anisotropic_strips(std::uint64_t seed);

// Two one-dimensional blobs; every measure orders pairs identically.
Labeled isotropic_line_blobs(std::uint64_t seed);

// Uniform noise in a cube, used for termination checks.
cgrl::AecsMatrix uniform_cloud(std::size_t m, std::size_t dim, std::uint64_t seed);

// Random AECS-like matrix with a given size.
cgrl::AecsMatrix random_points(std::size_t m, std::size_t dim, cgrl::Rng& rng);

// Small labeled dataset with random windows and labels.
cgrl::WindowedDataset random_dataset(std::size_t m, std::size_t t, std::size_t d, std::size_t classes,
                                     std::uint64_t seed);

}  // namespace fixtures

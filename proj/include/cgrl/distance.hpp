#pragma once

#include <optional>
#include <span>
#include <string>

#include "cgrl/core.hpp"

namespace cgrl {

/// Inverse of the ridge-regularized covariance of a representation set.
struct MahalanobisContext {
  Matrix inverse_covariance;  // h x h, symmetric positive definite
  double regularization = 0.0;
  std::string source_fingerprint;
};

double chebyshev(std::span<const double> a, std::span<const double> b);
double manhattan(std::span<const double> a, std::span<const double> b);
double mahalanobis(std::span<const double> a, std::span<const double> b, const MahalanobisContext& ctx);

// Unbiased sample covariance C of the rows, regularized as C + eps*I with
// eps = max(epsilon_scale * trace(C) / h, 1e-12), inverted through a Cholesky factor.
MahalanobisContext fit_mahalanobis(const AecsMatrix& aecs, double epsilon_scale = 1e-6);

// Dispatches on the measure. ctx is required for MAHALANOBIS.
double distance(DistanceMeasure measure, std::span<const double> a, std::span<const double> b,
                const MahalanobisContext* ctx = nullptr);

// Symmetric M x M matrix with a zero diagonal; only the upper triangle is computed.
Matrix pairwise_matrix(const Matrix& points, DistanceMeasure measure, const MahalanobisContext* ctx = nullptr);
inline Matrix pairwise_matrix(const AecsMatrix& aecs, DistanceMeasure measure, const MahalanobisContext* ctx = nullptr) {
  return pairwise_matrix(aecs.vectors, measure, ctx);
}

}  // namespace cgrl

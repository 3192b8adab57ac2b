#include "cgrl/distance.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace cgrl {
namespace {

void require_same_length(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("distance: vector length mismatch");
}

}  // namespace

double chebyshev(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b);
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

double manhattan(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b);
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
  return s;
}

double mahalanobis(std::span<const double> a, std::span<const double> b, const MahalanobisContext& ctx) {
  require_same_length(a, b);
  const std::size_t h = ctx.inverse_covariance.rows;
  if (a.size() != h) throw std::invalid_argument("mahalanobis: vector length does not match context");
  std::vector<double> diff(h);
  for (std::size_t k = 0; k < h; ++k) diff[k] = a[k] - b[k];
  double q = 0.0;
  for (std::size_t r = 0; r < h; ++r) {
    double row = 0.0;
    for (std::size_t c = 0; c < h; ++c) row += ctx.inverse_covariance(r, c) * diff[c];
    q += diff[r] * row;
  }
  return std::sqrt(std::max(0.0, q));
}

MahalanobisContext fit_mahalanobis(const AecsMatrix& aecs, double epsilon_scale) {
  const std::size_t M = aecs.size();
  const std::size_t h = aecs.dim();
  if (M < 2) throw std::invalid_argument("fit_mahalanobis: need at least two rows");
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> X(
      aecs.vectors.data.data(), static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(h));
  const Eigen::RowVectorXd mean = X.colwise().mean();
  const Eigen::MatrixXd centred = X.rowwise() - mean;
  Eigen::MatrixXd cov = (centred.transpose() * centred) / static_cast<double>(M - 1);
  if (!cov.allFinite()) throw std::invalid_argument("fit_mahalanobis: non-finite covariance");

  MahalanobisContext ctx;
  ctx.regularization = std::max(epsilon_scale * cov.trace() / static_cast<double>(h), 1e-12);
  cov.diagonal().array() += ctx.regularization;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("fit_mahalanobis: covariance not positive definite");
  const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(h)));

  ctx.inverse_covariance = Matrix(h, h);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < h; ++c)
      // Symmetrize so that d(a,b) == d(b,a) bit-exactly.
      ctx.inverse_covariance(r, c) = 0.5 * (inv(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) +
                                            inv(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)));
  ctx.source_fingerprint = fingerprint(aecs.vectors.data);
  return ctx;
}

double distance(DistanceMeasure measure, std::span<const double> a, std::span<const double> b,
                const MahalanobisContext* ctx) {
  switch (measure) {
    case DistanceMeasure::Chebyshev: return chebyshev(a, b);
    case DistanceMeasure::Manhattan: return manhattan(a, b);
    case DistanceMeasure::Mahalanobis:
      if (!ctx) throw std::invalid_argument("distance: MAHALANOBIS requires a fitted context");
      return mahalanobis(a, b, *ctx);
  }
  throw std::invalid_argument("distance: unknown measure");
}

Matrix pairwise_matrix(const Matrix& points, DistanceMeasure measure, const MahalanobisContext* ctx) {
  if (measure == DistanceMeasure::Mahalanobis && !ctx)
    throw std::invalid_argument("pairwise_matrix: MAHALANOBIS requires a fitted context");
  const std::size_t M = points.rows;
  Matrix D(M, M);
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = i + 1; j < M; ++j) {
      const double v = distance(measure, points.row(i), points.row(j), ctx);
      D(i, j) = v;
      D(j, i) = v;
    }
  }
  return D;
}

}  // namespace cgrl

#include "cellipse/preprocess.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace cellipse {

ChannelStats channel_statistics(const PixelImage& img) { return channel_statistics(img.as_matrix()); }

ChannelBasis principal_axes(const Eigen::Matrix3d& covariance) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver;
  solver.computeDirect(covariance);
  ChannelBasis basis;
  basis.eigenvalues = solver.eigenvalues();
  basis.eigenvectors = solver.eigenvectors();
  return basis;
}

Eigen::MatrixX3d decorrelation_stretch_values(const Eigen::MatrixX3d& samples,
                                              double target_sigma, StretchReport* report) {
  if (!(target_sigma > 0)) throw DomainError("target_sigma must be positive");
  const ChannelStats stats = channel_statistics(samples);
  const ChannelBasis basis = principal_axes(stats.covariance);

  Eigen::Vector3d scale;
  StretchReport local;
  for (int i = 0; i < 3; ++i) {
    const double lambda = basis.eigenvalues(i);
    local.degenerate[static_cast<std::size_t>(i)] = !(lambda > kEigenFloor);
    scale(i) = lambda > kEigenFloor ? target_sigma / std::sqrt(lambda + kEigenFloor) : 1.0;
  }
  if (report) *report = local;

  const Eigen::Matrix3d rotation =
      basis.eigenvectors * scale.asDiagonal() * basis.eigenvectors.transpose();
  // Row vectors: (p - mean) R^T, and R is symmetric.
  return ((samples.rowwise() - stats.mean.transpose()) * rotation).rowwise() +
         stats.mean.transpose();
}

PixelImage decorrelation_stretch(const PixelImage& img, double target_sigma,
                                 StretchReport* report) {
  return PixelImage::from_matrix(img.width(), img.height(),
                                 decorrelation_stretch_values(img.as_matrix(), target_sigma, report));
}

}  // namespace cellipse

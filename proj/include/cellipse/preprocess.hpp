#pragma once

#include <array>

#include <Eigen/Core>

#include "cellipse/errors.hpp"
#include "cellipse/raster.hpp"

namespace cellipse {

struct ChannelStats {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  /// Population (1/N) covariance.
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
};

/// Statistics over the rows of an N x 3 sample matrix. Throws DomainError if empty.
template <typename Derived>
ChannelStats channel_statistics(const Eigen::MatrixBase<Derived>& samples);

ChannelStats channel_statistics(const PixelImage& img);

struct ChannelBasis {
  /// Ascending eigenvalues and matching unit eigenvectors (columns).
  Eigen::Vector3d eigenvalues = Eigen::Vector3d::Zero();
  Eigen::Matrix3d eigenvectors = Eigen::Matrix3d::Identity();
};

/// Closed-form eigen-decomposition of the 3x3 covariance.
ChannelBasis principal_axes(const Eigen::Matrix3d& covariance);

inline constexpr double kEigenFloor = 1e-12;

struct StretchReport {
  /// Principal components whose variance was at or below the floor and
  /// therefore left unscaled.
  std::array<bool, 3> degenerate{false, false, false};

  bool any_degenerate() const { return degenerate[0] || degenerate[1] || degenerate[2]; }
};

/// Per-pixel decorrelation stretch on unclamped values: every sample is mapped
/// to mean + E S E^T (p - mean) with S = diag(target_sigma / sqrt(lambda + eps)).
Eigen::MatrixX3d decorrelation_stretch_values(const Eigen::MatrixX3d& samples,
                                              double target_sigma,
                                              StretchReport* report = nullptr);

/// Decorrelation stretch of an image, rounded and clamped to [0,255].
/// Throws DomainError unless target_sigma > 0.
PixelImage decorrelation_stretch(const PixelImage& img, double target_sigma,
                                 StretchReport* report = nullptr);

// ---------------------------------------------------------------------------

template <typename Derived>
ChannelStats channel_statistics(const Eigen::MatrixBase<Derived>& samples) {
  static_assert(Derived::ColsAtCompileTime == 3 || Derived::ColsAtCompileTime == Eigen::Dynamic);
  ChannelStats stats;
  const auto n = samples.rows();
  if (n == 0 || samples.cols() != 3) throw DomainError("channel_statistics: empty sample set");
  stats.mean = samples.colwise().mean().transpose().template cast<double>();
  const Eigen::MatrixX3d centered =
      samples.template cast<double>().rowwise() - stats.mean.transpose();
  stats.covariance = (centered.transpose() * centered) / static_cast<double>(n);
  return stats;
}

}  // namespace cellipse

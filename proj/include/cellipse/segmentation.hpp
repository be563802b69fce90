#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "cellipse/raster.hpp"

namespace cellipse {

struct KMeansOptions {
  int k = 3;
  std::uint64_t seed = 0;
  /// Stop once no centroid moves farther than this (intensity units).
  double tol = 0.5;
  int max_iter = 100;
};

struct KMeansModel {
  int k = 0;
  std::vector<Eigen::Vector3d> centroids;
  std::vector<int> assignments;
  /// Sum of squared distances after each assignment step.
  std::vector<double> objective_history;
  int iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding. Throws DegenerateInputError when
/// the image has fewer than k distinct colours, DomainError when k < 2.
KMeansModel kmeans_cluster(const PixelImage& img, const KMeansOptions& options);

struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<int> labels;
  int background_label = 0;
  int k = 0;

  int at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

/// Label with the most border pixels; ties go to the larger class, then the
/// smaller index.
int identify_background_label(const LabelMap& labelmap);

LabelMap segment_image(const PixelImage& img, const KMeansOptions& options);

/// Background pixels that cannot reach the image border through 4-connected
/// background become foreground.
BinaryMask fill_holes(const BinaryMask& mask);

struct BoundingBox {
  int min_x = 0, min_y = 0, max_x = -1, max_y = -1;

  int width() const { return max_x - min_x + 1; }
  int height() const { return max_y - min_y + 1; }
};

/// One 8-connected foreground region.
struct Blob {
  int class_label = 0;
  std::vector<Eigen::Vector2i> pixels;
  BoundingBox bounding_box;

  std::size_t area() const { return pixels.size(); }
};

BinaryMask class_mask(const LabelMap& labelmap, int class_label);

/// 8-connected components of `mask` with at least `min_area` pixels, ordered by
/// their first pixel in raster order.
std::vector<Blob> connected_components(const BinaryMask& mask, int class_label,
                                       std::size_t min_area);

/// Hole-filled 8-connected components of one class. Throws DomainError for the
/// background label.
std::vector<Blob> extract_blobs(const LabelMap& labelmap, int class_label, std::size_t min_area);

}  // namespace cellipse

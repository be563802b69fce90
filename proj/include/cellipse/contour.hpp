#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "cellipse/segmentation.hpp"

namespace cellipse {

/// Closed chain of boundary pixels; the successor of the last point is the first.
struct Contour {
  std::vector<Eigen::Vector2i> points;
  /// Set for single-pixel blobs, which have no boundary to follow.
  bool degenerate = false;

  std::size_t size() const { return points.size(); }
};

/// Vertices kept by polygon approximation, with their positions in the source contour.
struct ApproxContour {
  std::vector<Eigen::Vector2i> points;
  std::vector<std::size_t> source_indices;

  std::size_t size() const { return points.size(); }
};

struct ConcavitySpec {
  double theta_min = 35.0;
  double theta_max = 155.0;
  int n_step = 5;
  double d_th = 3.5;

  /// Throws DomainError on an invalid combination.
  void validate() const;
};

struct ImageBounds {
  int width = 0;
  int height = 0;
};

enum class SplitKind { Concave, Inserted, Boundary };

struct SplitPoint {
  std::size_t vertex = 0;
  SplitKind kind = SplitKind::Concave;

  friend bool operator==(const SplitPoint&, const SplitPoint&) = default;
};

/// Part of a contour between two consecutive split points.
struct ContourSegment {
  /// Approximation vertices from the first split to the next, both inclusive.
  std::vector<Eigen::Vector2i> points;
  /// The original boundary pixels covered by the same span.
  std::vector<Eigen::Vector2i> trace;
  /// Index in the source contour of trace.front().
  std::size_t trace_begin = 0;
  SplitKind start_kind = SplitKind::Concave;
  SplitKind end_kind = SplitKind::Concave;
  /// True for the single segment of an unsplit contour.
  bool closed = false;
};

/// Moore-neighbour boundary following from the blob's top-left pixel,
/// clockwise on screen (y pointing down). Holes are ignored.
Contour trace_contour(const Blob& blob);

/// Closed moving average over 2*half_window+1 consecutive contour points.
/// Zero returns the points unchanged.
std::vector<Eigen::Vector2d> smooth_contour(const Contour& contour, int half_window);

/// Sequential polygon approximation with tolerance dTh. Every contour
/// point ends up within dTh of the returned closed polygon.
ApproxContour approximate_polygon(const Contour& contour, const ConcavitySpec& spec);

/// Unsigned angle at `mid` between the rays to `prev` and `next`, in degrees.
/// Throws DomainError if two of the points coincide.
double vertex_angle(const Eigen::Vector2i& prev, const Eigen::Vector2i& mid,
                    const Eigen::Vector2i& next);

/// Whether the chord joining the neighbours of vertex i properly crosses a
/// polygon edge that does not touch vertices i-1, i or i+1.
bool chord_crosses_contour(const ApproxContour& pac, std::size_t i);

/// Twice the signed area of the polygon (shoelace).
long long signed_area2(std::span<const Eigen::Vector2i> polygon);

/// Vertices that satisfy the angle window, the chord rule and turn against
/// the polygon's orientation. Ascending.
std::vector<std::size_t> find_concave_points(const ApproxContour& pac, const ConcavitySpec& spec);

/// Adds split points for clipped cells (both ends of every run of vertices on
/// the image border) and, when neither border splits nor a second concave
/// point exist, a split opposite the single concave point.
std::vector<SplitPoint> apply_special_cases(const ApproxContour& pac,
                                            std::span<const std::size_t> concaves,
                                            const ImageBounds& bounds);

/// Cuts the contour at the sorted split vertices. Zero splits give one closed
/// segment. Throws DomainError for duplicate or out-of-range splits, or for a
/// single split.
std::vector<ContourSegment> split_segments(const ApproxContour& pac, const Contour& contour,
                                           std::span<const SplitPoint> splits);

/// Convenience overload taking bare vertex indices (all treated as concave).
std::vector<ContourSegment> split_segments(const ApproxContour& pac, const Contour& contour,
                                           std::span<const std::size_t> splits);

}  // namespace cellipse

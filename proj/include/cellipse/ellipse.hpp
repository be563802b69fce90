#pragma once

// Direct least-squares ellipse fitting and the rules that select, combine and
// refine per-segment fits into cells.
//
// Fits are computed on normalised points: the centroid is moved to the origin
// and the cloud is scaled isotropically so its RMS radius is sqrt(2). The conic
// is kept in that frame with 4AC - B^2 = 1, which is also the frame in which
// algebraic distances (and therefore disTh) are measured.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cellipse/errors.hpp"

namespace cellipse {

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

/// Similarity transform q = scale * (p - origin).
template <typename Scalar>
struct NormalizationFrame {
  Point2<Scalar> origin = Point2<Scalar>::Zero();
  Scalar scale = Scalar(1);

  Point2<Scalar> to_frame(const Point2<Scalar>& p) const { return scale * (p - origin); }
  Point2<Scalar> from_frame(const Point2<Scalar>& q) const { return q / scale + origin; }
};

/// A x^2 + B xy + C y^2 + D x + E y + F = 0, expressed in `frame`.
template <typename Scalar>
struct BasicConic {
  using Coefficients = Eigen::Matrix<Scalar, 6, 1>;

  Coefficients coefficients = Coefficients::Zero();
  NormalizationFrame<Scalar> frame;

  Scalar A() const { return coefficients(0); }
  Scalar B() const { return coefficients(1); }
  Scalar C() const { return coefficients(2); }
  Scalar D() const { return coefficients(3); }
  Scalar E() const { return coefficients(4); }
  Scalar F() const { return coefficients(5); }

  Scalar discriminant() const { return B() * B() - Scalar(4) * A() * C(); }

  Scalar evaluate_in_frame(const Point2<Scalar>& q) const {
    const Scalar x = q.x(), y = q.y();
    return A() * x * x + B() * x * y + C() * y * y + D() * x + E() * y + F();
  }
  /// Residual at an image-space point.
  Scalar evaluate(const Point2<Scalar>& p) const { return evaluate_in_frame(frame.to_frame(p)); }
};

template <typename Scalar>
struct BasicEllipse {
  Point2<Scalar> center = Point2<Scalar>::Zero();
  Scalar semi_major = Scalar(0);
  Scalar semi_minor = Scalar(0);
  /// Direction of the major axis in degrees, [0, 180), measured from +x towards +y.
  Scalar orientation_deg = Scalar(0);

  Scalar area() const { return std::numbers::pi_v<Scalar> * semi_major * semi_minor; }
  Scalar axis_ratio() const { return semi_minor / semi_major; }

  /// Point at parameter t (radians) on the outline.
  Point2<Scalar> point_at(Scalar t) const {
    const Scalar th = orientation_deg * std::numbers::pi_v<Scalar> / Scalar(180);
    const Scalar u = semi_major * std::cos(t), v = semi_minor * std::sin(t);
    return center + Point2<Scalar>(u * std::cos(th) - v * std::sin(th),
                                   u * std::sin(th) + v * std::cos(th));
  }

  bool contains(const Point2<Scalar>& p) const {
    const Scalar th = orientation_deg * std::numbers::pi_v<Scalar> / Scalar(180);
    const Point2<Scalar> d = p - center;
    const Scalar u = d.x() * std::cos(th) + d.y() * std::sin(th);
    const Scalar v = -d.x() * std::sin(th) + d.y() * std::cos(th);
    return (u * u) / (semi_major * semi_major) + (v * v) / (semi_minor * semi_minor) <= Scalar(1);
  }
};

template <typename Scalar>
struct BasicFitQuality {
  Scalar mean_algebraic_distance = Scalar(0);
  Scalar axis_ratio = Scalar(0);
};

template <typename Scalar>
struct BasicEllipseFit {
  BasicConic<Scalar> conic;
  BasicEllipse<Scalar> ellipse;
  BasicFitQuality<Scalar> quality;
};

using Conic = BasicConic<double>;
using Ellipse = BasicEllipse<double>;
using FitQuality = BasicFitQuality<double>;
using EllipseFit = BasicEllipseFit<double>;

/// Geometric parameters of a conic, or nullopt if it is not a real ellipse.
template <typename Scalar>
std::optional<BasicEllipse<Scalar>> conic_to_ellipse(const BasicConic<Scalar>& conic) {
  const Scalar A = conic.A(), B = conic.B(), C = conic.C(), D = conic.D(), E = conic.E(),
               F = conic.F();
  const Scalar det = Scalar(4) * A * C - B * B;
  if (!(det > Scalar(0))) return std::nullopt;

  const Point2<Scalar> c((B * E - Scalar(2) * C * D) / det, (B * D - Scalar(2) * A * E) / det);
  const Scalar f0 = F + (D * c.x() + E * c.y()) / Scalar(2);

  const Scalar mid = (A + C) / Scalar(2);
  const Scalar rad = std::hypot((A - C) / Scalar(2), B / Scalar(2));
  // Sign of (A + C) fixes the sign of both eigenvalues when det > 0.
  const Scalar sign = mid > Scalar(0) ? Scalar(1) : Scalar(-1);
  const Scalar lam_small = sign * mid - rad;
  const Scalar lam_big = sign * mid + rad;
  const Scalar rhs = -sign * f0;
  if (!(lam_small > Scalar(0)) || !(rhs > Scalar(0))) return std::nullopt;

  BasicEllipse<Scalar> e;
  e.semi_major = std::sqrt(rhs / lam_small);
  e.semi_minor = std::sqrt(rhs / lam_big);
  // The eigenvector of the larger eigenvalue lies at half the angle of
  // (A - C, B); the major axis is perpendicular to it.
  Scalar phi = Scalar(0.5) * std::atan2(sign * B, sign * (A - C)) * Scalar(180) /
                   std::numbers::pi_v<Scalar> + Scalar(90);
  phi = std::fmod(phi, Scalar(180));
  if (phi < Scalar(0)) phi += Scalar(180);
  if (phi >= Scalar(180)) phi -= Scalar(180);
  e.orientation_deg = phi;

  const Scalar s = conic.frame.scale;
  e.center = conic.frame.from_frame(c);
  e.semi_major /= s;
  e.semi_minor /= s;
  if (!std::isfinite(e.semi_major) || !std::isfinite(e.semi_minor) || !e.center.allFinite() ||
      !(e.semi_minor > Scalar(0)))
    return std::nullopt;
  return e;
}

/// Mean of |conic(p)| over `points`, evaluated in the conic's frame.
template <typename Scalar>
Scalar mean_algebraic_distance(const BasicConic<Scalar>& conic,
                               std::span<const Point2<Scalar>> points) {
  if (points.empty()) throw DomainError("mean_algebraic_distance: no points");
  Scalar sum = Scalar(0);
  for (const auto& p : points) sum += std::abs(conic.evaluate(p));
  return sum / static_cast<Scalar>(points.size());
}

template <typename Scalar>
NormalizationFrame<Scalar> normalization_frame(std::span<const Point2<Scalar>> points) {
  NormalizationFrame<Scalar> frame;
  Point2<Scalar> centroid = Point2<Scalar>::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<Scalar>(points.size());
  Scalar ms = Scalar(0);
  for (const auto& p : points) ms += (p - centroid).squaredNorm();
  ms /= static_cast<Scalar>(points.size());
  frame.origin = centroid;
  frame.scale = ms > Scalar(0) ? std::sqrt(Scalar(2) / ms) : Scalar(0);
  return frame;
}

/// Ellipse-specific direct least-squares fit (reduced 3x3 eigenproblem on
/// the quadratic block). Returns nullopt when no ellipse can be fitted:
/// fewer than six points, collinear points, or a degenerate solution.
template <typename Scalar>
std::optional<BasicEllipseFit<Scalar>> try_fit_ellipse(std::span<const Point2<Scalar>> points) {
  using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
  using Rows = Eigen::Matrix<Scalar, Eigen::Dynamic, 3>;

  const auto n = static_cast<Eigen::Index>(points.size());
  if (n < 6) return std::nullopt;

  const auto frame = normalization_frame(points);
  if (!(frame.scale > Scalar(0)) || !std::isfinite(frame.scale)) return std::nullopt;

  Rows quad(n, 3), lin(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Point2<Scalar> q = frame.to_frame(points[static_cast<std::size_t>(i)]);
    quad.row(i) << q.x() * q.x(), q.x() * q.y(), q.y() * q.y();
    lin.row(i) << q.x(), q.y(), Scalar(1);
  }
  const Mat3 s1 = quad.transpose() * quad;
  const Mat3 s2 = quad.transpose() * lin;
  const Mat3 s3 = lin.transpose() * lin;

  // s3 is singular exactly when the points are collinear.
  Eigen::SelfAdjointEigenSolver<Mat3> s3_eig;
  s3_eig.computeDirect(s3, Eigen::EigenvaluesOnly);
  const Scalar tol = std::sqrt(Eigen::NumTraits<Scalar>::epsilon());
  if (!(s3_eig.eigenvalues()(0) > tol * s3_eig.eigenvalues()(2))) return std::nullopt;

  const Mat3 t = -s3.ldlt().solve(s2.transpose());
  const Mat3 m = s1 + s2 * t;
  // Premultiply by the inverse of the 3x3 constraint block [[0,0,2],[0,-1,0],[2,0,0]].
  Mat3 reduced;
  reduced.row(0) = m.row(2) / Scalar(2);
  reduced.row(1) = -m.row(1);
  reduced.row(2) = m.row(0) / Scalar(2);

  Eigen::EigenSolver<Mat3> eig(reduced);
  if (eig.info() != Eigen::Success) return std::nullopt;

  Vec3 best = Vec3::Zero();
  Scalar best_constraint = Scalar(0);
  for (int k = 0; k < 3; ++k) {
    const auto vc = eig.eigenvectors().col(k);
    if (vc.imag().norm() > tol * vc.real().norm()) continue;
    Vec3 v = vc.real();
    const Scalar norm = v.norm();
    if (!(norm > Scalar(0))) continue;
    v /= norm;
    const Scalar constraint = Scalar(4) * v(0) * v(2) - v(1) * v(1);
    if (constraint > best_constraint) {
      best_constraint = constraint;
      best = v;
    }
  }
  if (!(best_constraint > tol)) return std::nullopt;

  Vec3 a1 = best / std::sqrt(best_constraint);
  if (a1(0) + a1(2) < Scalar(0)) a1 = -a1;
  const Vec3 a2 = t * a1;

  BasicEllipseFit<Scalar> fit;
  fit.conic.coefficients << a1, a2;
  fit.conic.frame = frame;
  if (!fit.conic.coefficients.allFinite()) return std::nullopt;

  auto ellipse = conic_to_ellipse(fit.conic);
  if (!ellipse) return std::nullopt;
  fit.ellipse = *ellipse;
  fit.quality.mean_algebraic_distance = mean_algebraic_distance(fit.conic, points);
  fit.quality.axis_ratio = ellipse->axis_ratio();
  return fit;
}

/// As try_fit_ellipse, throwing FitFailure instead of returning nullopt.
template <typename Scalar>
BasicEllipseFit<Scalar> fit_ellipse_direct(std::span<const Point2<Scalar>> points) {
  if (points.size() < 6) throw FitFailure("ellipse fit needs at least 6 points");
  auto fit = try_fit_ellipse(points);
  if (!fit) throw FitFailure("no ellipse fits the points");
  return *fit;
}

// ---------------------------------------------------------------------------
// Selection, combination and refinement.

struct CombineParams {
  double dis_th = 0.03;
  double e_th = 0.2;
  double d_min_th = 4.0;
  double separation_factor = 3.0;

  /// Throws DomainError unless all values are positive and e_th < 1.
  void validate() const;
};

/// A contour fragment (or union of fragments) with its current fit.
struct CellCandidate {
  std::vector<Eigen::Vector2d> points;
  /// Indices of the contour segments merged into this candidate, ascending.
  std::vector<std::size_t> segments;
  std::optional<EllipseFit> fit;

  std::size_t first_segment() const { return segments.empty() ? 0 : segments.front(); }
};

CellCandidate make_candidate(std::vector<Eigen::Vector2d> points, std::size_t segment_index);

bool passes_selection(const std::optional<EllipseFit>& fit, const CombineParams& params);

struct Selection {
  std::vector<CellCandidate> selected;
  std::vector<CellCandidate> leftovers;
};

/// Splits candidates into those with mean algebraic distance < disTh and
/// axis ratio > eTh, and everything else (fit failures included).
Selection select_ellipses(std::vector<CellCandidate> candidates, const CombineParams& params);

/// True when the pair must stay separate: both old centres are farther than
/// dMinTh from the merged centre, or the old centres are farther apart than
/// separation_factor * dMinTh.
bool case1_keep_separate(const Ellipse& ei, const Ellipse& ej, const Ellipse& merged,
                         const CombineParams& params);

/// True when the merged fit is strictly better than both parts.
bool case2_better_fit(double d_i, double d_j, double d_ij);

struct MergeRecord {
  std::size_t i = 0;
  std::size_t j = 0;
  Eigen::Vector2d center_i = Eigen::Vector2d::Zero();
  Eigen::Vector2d center_j = Eigen::Vector2d::Zero();
  Eigen::Vector2d center_merged = Eigen::Vector2d::Zero();
  bool case1 = false;
  std::size_t count_before = 0;
  std::size_t count_after = 0;
};

struct CombineLog {
  std::vector<MergeRecord> merges;
  std::size_t scans = 0;
  std::size_t pair_evaluations = 0;
};

/// Pairwise merge scan. After every merge the scan restarts from the first
/// candidate; it ends when a full scan merges nothing.
std::vector<CellCandidate> combine_ellipses(std::vector<CellCandidate> selected,
                                            const CombineParams& params,
                                            CombineLog* log = nullptr);

/// Attaches each leftover (smallest first) to the candidate whose refitted
/// union has the lowest mean algebraic distance while still passing
/// selection. Leftovers that fit nowhere are dropped.
std::vector<CellCandidate> refine_with_leftovers(std::vector<CellCandidate> combined,
                                                 std::vector<CellCandidate> leftovers,
                                                 const CombineParams& params);

}  // namespace cellipse

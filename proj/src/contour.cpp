#include "cellipse/contour.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "cellipse/errors.hpp"

namespace cellipse {

void ConcavitySpec::validate() const {
  if (!(theta_min > 0) || !(theta_min < theta_max) || !(theta_max < 180))
    throw DomainError("concavity angles must satisfy 0 < theta_min < theta_max < 180");
  if (n_step < 2) throw DomainError("nStep must be at least 2");
  if (!(d_th > 0)) throw DomainError("dTh must be positive");
}

// ---------------------------------------------------------------------------
// Tracing

namespace {

// Clockwise on screen (y down), starting west.
const std::array<Eigen::Vector2i, 8> kRing{
    Eigen::Vector2i{-1, 0}, Eigen::Vector2i{-1, -1}, Eigen::Vector2i{0, -1},
    Eigen::Vector2i{1, -1}, Eigen::Vector2i{1, 0},   Eigen::Vector2i{1, 1},
    Eigen::Vector2i{0, 1},  Eigen::Vector2i{-1, 1},
};

int ring_index(const Eigen::Vector2i& d) {
  for (int i = 0; i < 8; ++i)
    if (kRing[static_cast<std::size_t>(i)] == d) return i;
  return -1;
}

class LocalMask {
 public:
  explicit LocalMask(const Blob& blob)
      : x0_(blob.bounding_box.min_x - 1),
        y0_(blob.bounding_box.min_y - 1),
        w_(blob.bounding_box.width() + 2),
        h_(blob.bounding_box.height() + 2),
        bits_(static_cast<std::size_t>(w_) * h_, 0) {
    for (const auto& p : blob.pixels) bits_[index(p)] = 1;
  }

  bool at(const Eigen::Vector2i& p) const {
    const int x = p.x() - x0_, y = p.y() - y0_;
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return false;
    return bits_[index(p)] != 0;
  }

 private:
  std::size_t index(const Eigen::Vector2i& p) const {
    return static_cast<std::size_t>(p.y() - y0_) * w_ + (p.x() - x0_);
  }

  int x0_, y0_, w_, h_;
  std::vector<std::uint8_t> bits_;
};

}  // namespace

Contour trace_contour(const Blob& blob) {
  if (blob.pixels.empty()) throw DomainError("trace_contour: empty blob");
  Contour contour;
  const Eigen::Vector2i start = *std::min_element(
      blob.pixels.begin(), blob.pixels.end(), [](const Eigen::Vector2i& a, const Eigen::Vector2i& b) {
        return a.y() != b.y() ? a.y() < b.y() : a.x() < b.x();
      });
  contour.points.push_back(start);
  if (blob.pixels.size() == 1) {
    contour.degenerate = true;
    return contour;
  }

  const LocalMask mask(blob);
  // Everything west of and above the start pixel is background.
  Eigen::Vector2i p = start;
  int back = 0;
  Eigen::Vector2i second;
  bool first_move = true;
  const std::size_t limit = 8 * blob.pixels.size() + 16;

  while (contour.points.size() <= limit) {
    Eigen::Vector2i q;
    int found = -1;
    for (int r = 1; r <= 8; ++r) {
      const int d = (back + r) % 8;
      q = p + kRing[static_cast<std::size_t>(d)];
      if (mask.at(q)) {
        found = d;
        break;
      }
    }
    if (found < 0) {
      // Isolated pixel inside a multi-pixel blob: not 8-connected.
      throw DomainError("trace_contour: blob is not 8-connected");
    }
    if (first_move) {
      second = q;
      first_move = false;
    } else if (p == start && q == second) {
      contour.points.pop_back();  // the closing return to `start`
      break;
    }
    const Eigen::Vector2i probe = p + kRing[static_cast<std::size_t>((found + 7) % 8)];
    back = ring_index(probe - q);
    p = q;
    contour.points.push_back(p);
  }
  return contour;
}

std::vector<Eigen::Vector2d> smooth_contour(const Contour& contour, int half_window) {
  const auto n = static_cast<long>(contour.size());
  std::vector<Eigen::Vector2d> out(static_cast<std::size_t>(n));
  const long h = std::min<long>(std::max(half_window, 0), (n - 1) / 2);
  for (long i = 0; i < n; ++i) {
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    for (long k = -h; k <= h; ++k)
      sum += contour.points[static_cast<std::size_t>(((i + k) % n + n) % n)].cast<double>();
    out[static_cast<std::size_t>(i)] = sum / static_cast<double>(2 * h + 1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Polygon approximation

namespace {

double point_segment_distance(const Eigen::Vector2i& p, const Eigen::Vector2i& a,
                              const Eigen::Vector2i& b) {
  const Eigen::Vector2d pa = (p - a).cast<double>();
  const Eigen::Vector2d ab = (b - a).cast<double>();
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return pa.norm();
  const double t = std::clamp(pa.dot(ab) / len2, 0.0, 1.0);
  return (pa - t * ab).norm();
}

class Approximator {
 public:
  Approximator(const Contour& contour, double d_th) : pts_(contour.points), d_th_(d_th) {}

  const Eigen::Vector2i& at(std::size_t i) const { return pts_[i % pts_.size()]; }

  // Farthest point strictly between i and j (unwrapped indices) from chord i-j.
  std::pair<std::size_t, double> farthest(std::size_t i, std::size_t j) const {
    std::size_t best = i;
    double best_d = -1.0;
    for (std::size_t t = i + 1; t < j; ++t) {
      const double d = point_segment_distance(at(t), at(i), at(j));
      if (d > best_d) {
        best_d = d;
        best = t;
      }
    }
    return {best, best_d};
  }

  // Splits chord i-j until every point between lies within dTh.
  void refine(std::size_t i, std::size_t j, std::vector<std::size_t>& out) const {
    const auto [t, d] = farthest(i, j);
    if (d <= d_th_) return;
    refine(i, t, out);
    out.push_back(t);
    refine(t, j, out);
  }

 private:
  const std::vector<Eigen::Vector2i>& pts_;
  double d_th_;
};

}  // namespace

ApproxContour approximate_polygon(const Contour& contour, const ConcavitySpec& spec) {
  ApproxContour pac;
  const std::size_t n = contour.points.size();
  if (n <= 3) {
    pac.points = contour.points;
    for (std::size_t i = 0; i < n; ++i) pac.source_indices.push_back(i);
    return pac;
  }

  const Approximator approx(contour, spec.d_th);
  const auto step = static_cast<std::size_t>(spec.n_step);
  std::vector<std::size_t> vertices{0};
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = std::min(i + step, n);
    while (true) {
      const auto [t, d] = approx.farthest(i, j);
      if (d > spec.d_th) {
        // Keep the chord i-t itself within tolerance before moving on.
        approx.refine(i, t, vertices);
        vertices.push_back(t);
        i = t;
        break;
      }
      if (j == n) {
        i = n;
        break;
      }
      ++j;
    }
  }

  for (std::size_t v : vertices) {
    pac.points.push_back(contour.points[v]);
    pac.source_indices.push_back(v);
  }
  return pac;
}

// ---------------------------------------------------------------------------
// Concave points

double vertex_angle(const Eigen::Vector2i& prev, const Eigen::Vector2i& mid,
                    const Eigen::Vector2i& next) {
  if (prev == mid || next == mid || prev == next)
    throw DomainError("vertex_angle: coincident points");
  const double to_prev = std::atan2(prev.y() - mid.y(), prev.x() - mid.x());
  const double to_next = std::atan2(next.y() - mid.y(), next.x() - mid.x());
  double d = std::abs(to_prev - to_next) * 180.0 / std::numbers::pi;
  d = std::fmod(d, 360.0);
  return d <= 180.0 ? d : 360.0 - d;
}

namespace {

long long cross(const Eigen::Vector2i& o, const Eigen::Vector2i& a, const Eigen::Vector2i& b) {
  return static_cast<long long>(a.x() - o.x()) * (b.y() - o.y()) -
         static_cast<long long>(a.y() - o.y()) * (b.x() - o.x());
}

int sign(long long v) { return (v > 0) - (v < 0); }

bool properly_intersect(const Eigen::Vector2i& a, const Eigen::Vector2i& b,
                        const Eigen::Vector2i& c, const Eigen::Vector2i& d) {
  return sign(cross(a, b, c)) * sign(cross(a, b, d)) < 0 &&
         sign(cross(c, d, a)) * sign(cross(c, d, b)) < 0;
}

}  // namespace

bool chord_crosses_contour(const ApproxContour& pac, std::size_t i) {
  const std::size_t m = pac.size();
  if (i >= m) throw DomainError("chord_crosses_contour: vertex index out of range");
  if (m < 4) return false;
  const std::size_t prev = (i + m - 1) % m, next = (i + 1) % m;
  auto incident = [&](std::size_t v) { return v == prev || v == i || v == next; };
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t k1 = (k + 1) % m;
    if (incident(k) || incident(k1)) continue;
    if (properly_intersect(pac.points[prev], pac.points[next], pac.points[k], pac.points[k1]))
      return true;
  }
  return false;
}

long long signed_area2(std::span<const Eigen::Vector2i> polygon) {
  long long sum = 0;
  for (std::size_t k = 0; k < polygon.size(); ++k) {
    const auto& a = polygon[k];
    const auto& b = polygon[(k + 1) % polygon.size()];
    sum += static_cast<long long>(a.x()) * b.y() - static_cast<long long>(b.x()) * a.y();
  }
  return sum;
}

std::vector<std::size_t> find_concave_points(const ApproxContour& pac, const ConcavitySpec& spec) {
  std::vector<std::size_t> out;
  const std::size_t m = pac.size();
  if (m < 3) return out;
  const int orientation = sign(signed_area2(pac.points));
  if (orientation == 0) return out;

  for (std::size_t i = 0; i < m; ++i) {
    const auto& prev = pac.points[(i + m - 1) % m];
    const auto& mid = pac.points[i];
    const auto& next = pac.points[(i + 1) % m];
    if (prev == mid || next == mid || prev == next) continue;
    if (sign(cross(prev, mid, next)) * orientation >= 0) continue;  // convex or straight
    const double angle = vertex_angle(prev, mid, next);
    if (!(angle > spec.theta_min && angle < spec.theta_max)) continue;
    if (chord_crosses_contour(pac, i)) continue;
    out.push_back(i);
  }
  return out;
}

std::vector<SplitPoint> apply_special_cases(const ApproxContour& pac,
                                            std::span<const std::size_t> concaves,
                                            const ImageBounds& bounds) {
  const std::size_t m = pac.size();
  std::vector<SplitPoint> splits;
  auto add = [&](std::size_t v, SplitKind kind) {
    for (const auto& s : splits)
      if (s.vertex == v) return;
    splits.push_back({v, kind});
  };

  std::vector<bool> on_border(m);
  std::size_t border_count = 0;
  for (std::size_t v = 0; v < m; ++v) {
    const auto& p = pac.points[v];
    on_border[v] = p.x() <= 0 || p.y() <= 0 || p.x() >= bounds.width - 1 || p.y() >= bounds.height - 1;
    border_count += on_border[v];
  }

  bool border_split = false;
  if (border_count > 0 && border_count < m) {
    for (std::size_t v = 0; v < m; ++v) {
      if (!on_border[v] || on_border[(v + m - 1) % m]) continue;
      std::size_t last = v;
      while (on_border[(last + 1) % m]) last = (last + 1) % m;
      if (last == v) continue;  // a single vertex grazing the border
      add(v, SplitKind::Boundary);
      add(last, SplitKind::Boundary);
      border_split = true;
    }
  }

  for (std::size_t c : concaves) add(c, SplitKind::Concave);

  if (!border_split && concaves.size() == 1 && m >= 3)
    add((concaves[0] + m / 2) % m, SplitKind::Inserted);

  std::sort(splits.begin(), splits.end(),
            [](const SplitPoint& a, const SplitPoint& b) { return a.vertex < b.vertex; });
  return splits;
}

std::vector<ContourSegment> split_segments(const ApproxContour& pac, const Contour& contour,
                                           std::span<const SplitPoint> splits) {
  const std::size_t m = pac.size();
  const std::size_t n = contour.size();
  for (std::size_t s = 0; s < splits.size(); ++s) {
    if (splits[s].vertex >= m) throw DomainError("split_segments: split index out of range");
    if (s > 0 && splits[s].vertex <= splits[s - 1].vertex)
      throw DomainError("split_segments: splits must be sorted and distinct");
  }
  if (splits.size() == 1) throw DomainError("split_segments: a single split cannot cut a contour");

  std::vector<ContourSegment> segments;
  if (splits.empty()) {
    ContourSegment seg;
    seg.points = pac.points;
    seg.trace = contour.points;
    seg.trace_begin = 0;
    seg.closed = true;
    segments.push_back(std::move(seg));
    return segments;
  }

  for (std::size_t s = 0; s < splits.size(); ++s) {
    const auto& a = splits[s];
    const auto& b = splits[(s + 1) % splits.size()];
    ContourSegment seg;
    seg.start_kind = a.kind;
    seg.end_kind = b.kind;
    for (std::size_t v = a.vertex;; v = (v + 1) % m) {
      seg.points.push_back(pac.points[v]);
      if (v == b.vertex) break;
    }
    const std::size_t from = pac.source_indices[a.vertex];
    const std::size_t to = pac.source_indices[b.vertex];
    seg.trace_begin = from;
    for (std::size_t t = from;; t = (t + 1) % n) {
      seg.trace.push_back(contour.points[t]);
      if (t == to) break;
    }
    segments.push_back(std::move(seg));
  }
  return segments;
}

std::vector<ContourSegment> split_segments(const ApproxContour& pac, const Contour& contour,
                                           std::span<const std::size_t> splits) {
  std::vector<SplitPoint> points;
  points.reserve(splits.size());
  for (std::size_t v : splits) points.push_back({v, SplitKind::Concave});
  return split_segments(pac, contour, points);
}

}  // namespace cellipse

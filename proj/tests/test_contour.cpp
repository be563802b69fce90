#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "cellipse/contour.hpp"
#include "cellipse/errors.hpp"
#include "helpers.hpp"

using namespace cellipse;
using testing_helpers::disk_mask;
using testing_helpers::mask_from;
using testing_helpers::only_blob;
using testing_helpers::two_circles;

namespace {

ApproxContour polygon(std::vector<Eigen::Vector2i> pts) {
  ApproxContour pac;
  pac.points = std::move(pts);
  for (std::size_t i = 0; i < pac.points.size(); ++i) pac.source_indices.push_back(i);
  return pac;
}

Contour as_contour(const ApproxContour& pac) {
  Contour c;
  c.points = pac.points;
  return c;
}

// Vertices 0..m-1 placed on a circle; only the indices matter.
ApproxContour ring(std::size_t m) {
  std::vector<Eigen::Vector2i> pts;
  for (std::size_t i = 0; i < m; ++i) {
    const double t = 2 * M_PI * static_cast<double>(i) / static_cast<double>(m);
    pts.emplace_back(static_cast<int>(std::lround(50 + 40 * std::cos(t))),
                     static_cast<int>(std::lround(50 + 40 * std::sin(t))));
  }
  return polygon(pts);
}

double distance_to_polygon(const Eigen::Vector2d& p, const std::vector<Eigen::Vector2i>& poly) {
  double best = INFINITY;
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Eigen::Vector2d a = poly[k].cast<double>();
    const Eigen::Vector2d b = poly[(k + 1) % poly.size()].cast<double>();
    const Eigen::Vector2d ab = b - a;
    const double t = ab.squaredNorm() > 0 ? std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0) : 0.0;
    best = std::min(best, (p - a - t * ab).norm());
  }
  return best;
}

// Independent proper-intersection oracle in floating point.
bool segments_cross(Eigen::Vector2d a, Eigen::Vector2d b, Eigen::Vector2d c, Eigen::Vector2d d) {
  auto side = [](const Eigen::Vector2d& o, const Eigen::Vector2d& p, const Eigen::Vector2d& q) {
    const double v = (p - o).x() * (q - o).y() - (p - o).y() * (q - o).x();
    return (v > 0) - (v < 0);
  };
  return side(a, b, c) * side(a, b, d) < 0 && side(c, d, a) * side(c, d, b) < 0;
}

bool chord_oracle(const ApproxContour& pac, std::size_t i) {
  const std::size_t m = pac.size();
  const std::size_t p = (i + m - 1) % m, n = (i + 1) % m;
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t k1 = (k + 1) % m;
    const std::set<std::size_t> touched{p, i, n};
    if (touched.count(k) || touched.count(k1)) continue;
    if (segments_cross(pac.points[p].cast<double>(), pac.points[n].cast<double>(),
                       pac.points[k].cast<double>(), pac.points[k1].cast<double>()))
      return true;
  }
  return false;
}

// Union of a few random ellipses, reduced to its largest blob.
Blob random_blob(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  const int w = 80, h = 80;
  const int count = 1 + static_cast<int>(u(rng) * 3);
  struct E { double cx, cy, a, b, t; };
  std::vector<E> es;
  for (int i = 0; i < count; ++i)
    es.push_back({25 + 30 * u(rng), 25 + 30 * u(rng), 4 + 14 * u(rng), 3 + 8 * u(rng), M_PI * u(rng)});
  const auto m = mask_from(w, h, [&](int x, int y) {
    for (const auto& e : es) {
      const double dx = x - e.cx, dy = y - e.cy;
      const double p = dx * std::cos(e.t) + dy * std::sin(e.t), q = -dx * std::sin(e.t) + dy * std::cos(e.t);
      if (p * p / (e.a * e.a) + q * q / (e.b * e.b) <= 1) return true;
    }
    return false;
  });
  auto blobs = connected_components(m, 1, 1);
  return *std::max_element(blobs.begin(), blobs.end(),
                           [](const Blob& a, const Blob& b) { return a.area() < b.area(); });
}

}  // namespace

TEST(TraceContour, SquareRing) {
  const auto blob = only_blob(mask_from(7, 7, [](int x, int y) { return x >= 2 && x <= 4 && y >= 2 && y <= 4; }));
  const auto c = trace_contour(blob);
  ASSERT_EQ(c.size(), 8u);
  EXPECT_FALSE(c.degenerate);
  EXPECT_EQ(c.points[0], Eigen::Vector2i(2, 2));
  EXPECT_EQ(c.points[1], Eigen::Vector2i(3, 2));  // clockwise on screen: east first
  std::set<std::pair<int, int>> seen;
  for (const auto& p : c.points) seen.insert({p.x(), p.y()});
  EXPECT_EQ(seen.size(), 8u);
  EXPECT_FALSE(seen.count({3, 3}));
}

TEST(TraceContour, HorizontalBar) {
  const auto blob = only_blob(mask_from(9, 3, [](int x, int y) { return y == 1 && x >= 2 && x <= 6; }));
  const auto c = trace_contour(blob);
  ASSERT_EQ(c.size(), 8u);
  int ends = 0;
  for (const auto& p : c.points) ends += p.x() == 2 || p.x() == 6;
  EXPECT_EQ(ends, 2);
}

TEST(TraceContour, SinglePixelDegenerate) {
  BinaryMask m(3, 3);
  m.set(1, 1, true);
  const auto c = trace_contour(only_blob(m));
  EXPECT_TRUE(c.degenerate);
  EXPECT_EQ(c.size(), 1u);
}

TEST(TraceContour, StepsAreEightNeighbours) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const auto blob = random_blob(rng);
    const auto c = trace_contour(blob);
    for (std::size_t i = 0; i < c.size(); ++i) {
      const Eigen::Vector2i d = c.points[(i + 1) % c.size()] - c.points[i];
      EXPECT_LE(d.cwiseAbs().maxCoeff(), 1);
      EXPECT_NE(d, Eigen::Vector2i::Zero());
    }
  }
}

TEST(TraceContour, ClockwiseOnScreen) {
  const auto c = trace_contour(only_blob(disk_mask(30, 30, 15, 15, 8)));
  // With y pointing down, a clockwise loop has positive shoelace sum.
  EXPECT_GT(signed_area2(c.points), 0);
}

TEST(SmoothContour, ZeroWindowIsIdentity) {
  const auto c = trace_contour(only_blob(disk_mask(20, 20, 10, 10, 5)));
  const auto s = smooth_contour(c, 0);
  ASSERT_EQ(s.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(s[i], c.points[i].cast<double>());
}

TEST(SmoothContour, AveragesCyclically) {
  Contour c;
  c.points = {{0, 0}, {3, 0}, {3, 3}, {0, 3}};
  const auto s = smooth_contour(c, 1);
  EXPECT_TRUE(s[0].isApprox(Eigen::Vector2d(1, 1)));
  EXPECT_TRUE(s[1].isApprox(Eigen::Vector2d(2, 1)));
}

TEST(ApproximatePolygon, ThreePointsUnchanged) {
  Contour c;
  c.points = {{0, 0}, {1, 0}, {1, 1}};
  const auto pac = approximate_polygon(c, ConcavitySpec{});
  EXPECT_EQ(pac.points, c.points);
  EXPECT_EQ(pac.source_indices, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(ApproximatePolygon, RectangleKeepsCorners) {
  const auto blob = only_blob(mask_from(70, 20, [](int x, int y) { return x >= 5 && x <= 64 && y >= 5 && y <= 14; }));
  const auto contour = trace_contour(blob);
  const auto pac = approximate_polygon(contour, ConcavitySpec{});
  const std::vector<Eigen::Vector2d> corners{{5, 5}, {64, 5}, {64, 14}, {5, 14}};
  std::vector<int> per_corner(4, 0);
  for (const auto& v : pac.points) {
    int nearest = 0;
    for (int k = 1; k < 4; ++k)
      if ((v.cast<double>() - corners[k]).norm() < (v.cast<double>() - corners[nearest]).norm()) nearest = k;
    EXPECT_LE((v.cast<double>() - corners[nearest]).norm(), 3.5 + 1) << v.transpose();
    ++per_corner[nearest];
  }
  for (int k = 0; k < 4; ++k) {
    EXPECT_GE(per_corner[k], 1);
    EXPECT_LE(per_corner[k], 2);
  }
}

TEST(ApproximatePolygon, CircleWithinTolerance) {
  const auto contour = trace_contour(only_blob(disk_mask(120, 120, 60, 60, 50)));
  ConcavitySpec spec;
  const auto pac = approximate_polygon(contour, spec);
  EXPECT_LT(pac.size(), contour.size() / 4);
  for (const auto& p : contour.points) EXPECT_LE(distance_to_polygon(p.cast<double>(), pac.points), spec.d_th);
}

TEST(ApproximatePolygon, SubsetOfContourInOrder) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto contour = trace_contour(random_blob(rng));
    const auto pac = approximate_polygon(contour, ConcavitySpec{});
    ASSERT_EQ(pac.points.size(), pac.source_indices.size());
    for (std::size_t i = 0; i < pac.size(); ++i) {
      EXPECT_EQ(pac.points[i], contour.points[pac.source_indices[i]]);
      if (i > 0) EXPECT_GT(pac.source_indices[i], pac.source_indices[i - 1]);
    }
  }
}

TEST(VertexAngle, Examples) {
  EXPECT_NEAR(vertex_angle({0, 1}, {0, 0}, {1, 0}), 90.0, 1e-12);
  EXPECT_NEAR(vertex_angle({0, 0}, {1, 0}, {2, 0}), 180.0, 1e-12);
  EXPECT_NEAR(vertex_angle({1, 1}, {0, 0}, {1, -1}), 90.0, 1e-12);
}

TEST(VertexAngle, FoldsReflexDifference) {
  // Direction angles 135 and -135 differ by 270; the fold gives 90.
  EXPECT_NEAR(vertex_angle({-1, 1}, {0, 0}, {-1, -1}), 90.0, 1e-12);
}

TEST(VertexAngle, SymmetricAndInRange) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> u(-20, 20);
  for (int i = 0; i < 500; ++i) {
    const Eigen::Vector2i a(u(rng), u(rng)), m(u(rng), u(rng)), b(u(rng), u(rng));
    if (a == m || b == m || a == b) continue;
    const double ang = vertex_angle(a, m, b);
    EXPECT_DOUBLE_EQ(ang, vertex_angle(b, m, a));
    EXPECT_GE(ang, 0.0);
    EXPECT_LE(ang, 180.0);
    const Eigen::Vector2d da = (a - m).cast<double>(), db = (b - m).cast<double>();
    const double expected = std::acos(std::clamp(da.dot(db) / (da.norm() * db.norm()), -1.0, 1.0)) * 180 / M_PI;
    EXPECT_NEAR(ang, expected, 1e-5);
  }
}

TEST(VertexAngle, CoincidentPointsThrow) {
  EXPECT_THROW(vertex_angle({0, 0}, {0, 0}, {1, 0}), DomainError);
}

TEST(ChordCrosses, ConvexQuadrilateral) {
  const auto pac = polygon({{0, 0}, {10, 1}, {12, 9}, {1, 11}});
  for (std::size_t i = 0; i < 4; ++i) EXPECT_FALSE(chord_crosses_contour(pac, i));
}

TEST(ChordCrosses, Triangle) {
  const auto pac = polygon({{0, 0}, {10, 0}, {5, 8}});
  for (std::size_t i = 0; i < 3; ++i) EXPECT_FALSE(chord_crosses_contour(pac, i));
}

TEST(ChordCrosses, PeanutNotch) {
  const auto pac = polygon({{0, 0}, {4, -4}, {8, -1}, {12, -4}, {16, 0}, {12, 4}, {8, 1}, {4, 4}});
  EXPECT_FALSE(chord_crosses_contour(pac, 2));
  EXPECT_FALSE(chord_crosses_contour(pac, 6));
  for (std::size_t i = 0; i < pac.size(); ++i) EXPECT_EQ(chord_crosses_contour(pac, i), chord_oracle(pac, i)) << i;
}

TEST(ChordCrosses, CandidateAcrossNotch) {
  // The lower lobe hooks up past the chord joining the neighbours of vertex 1.
  const auto pac = polygon({{0, 0}, {4, -4}, {8, -1}, {12, -4}, {16, 0}, {12, 4}, {8, 1}, {4, -1}});
  EXPECT_TRUE(chord_crosses_contour(pac, 1));
  EXPECT_TRUE(chord_oracle(pac, 1));
  for (std::size_t i = 0; i < pac.size(); ++i) EXPECT_EQ(chord_crosses_contour(pac, i), chord_oracle(pac, i)) << i;
}

TEST(ChordCrosses, MatchesOracleOnRandomBlobs) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const auto pac = approximate_polygon(trace_contour(random_blob(rng)), ConcavitySpec{});
    for (std::size_t i = 0; i < pac.size(); ++i) EXPECT_EQ(chord_crosses_contour(pac, i), chord_oracle(pac, i));
  }
}

TEST(ChordCrosses, IndexOutOfRange) {
  EXPECT_THROW(chord_crosses_contour(polygon({{0, 0}, {1, 0}, {0, 1}}), 3), DomainError);
}

TEST(ConcavePoints, ConvexEllipseHasNone) {
  const auto m = mask_from(80, 60, [](int x, int y) {
    const double dx = (x - 40) / 30.0, dy = (y - 30) / 18.0;
    return dx * dx + dy * dy <= 1;
  });
  const auto pac = approximate_polygon(trace_contour(only_blob(m)), ConcavitySpec{});
  EXPECT_TRUE(find_concave_points(pac, ConcavitySpec{}).empty());
}

TEST(ConcavePoints, TwoOverlappingCirclesNeck) {
  const auto m = two_circles(200, 200, 20, 30);
  const auto pac = approximate_polygon(trace_contour(only_blob(m)), ConcavitySpec{});
  const auto concave = find_concave_points(pac, ConcavitySpec{});
  ASSERT_EQ(concave.size(), 2u);
  const double neck = std::sqrt(400.0 - 225.0);
  std::vector<double> ys;
  for (auto i : concave) {
    EXPECT_NEAR(pac.points[i].x(), 100.0, 2.0);
    ys.push_back(pac.points[i].y());
  }
  std::sort(ys.begin(), ys.end());
  EXPECT_NEAR(ys[0], 100 - neck, 2.0);
  EXPECT_NEAR(ys[1], 100 + neck, 2.0);
}

TEST(ConcavePoints, SquareWithNotch) {
  const auto pac = polygon({{0, 0}, {20, 0}, {20, 20}, {12, 20}, {12, 12}, {8, 12}, {8, 20}, {0, 20}});
  const auto concave = find_concave_points(pac, ConcavitySpec{});
  EXPECT_GE(concave.size(), 1u);
  EXPECT_LE(concave.size(), 2u);
  for (auto i : concave) EXPECT_TRUE(i == 4 || i == 5) << i;
}

TEST(ConcavePoints, InvariantUnderCyclicRelabel) {
  const auto m = two_circles(200, 200, 20, 30);
  const auto pac = approximate_polygon(trace_contour(only_blob(m)), ConcavitySpec{});
  auto collect = [](const ApproxContour& p) {
    std::set<std::pair<int, int>> s;
    for (auto i : find_concave_points(p, ConcavitySpec{})) s.insert({p.points[i].x(), p.points[i].y()});
    return s;
  };
  const auto reference = collect(pac);
  for (std::size_t shift = 1; shift < pac.size(); ++shift) {
    ApproxContour rotated;
    for (std::size_t k = 0; k < pac.size(); ++k) {
      rotated.points.push_back(pac.points[(k + shift) % pac.size()]);
      rotated.source_indices.push_back(k);
    }
    EXPECT_EQ(collect(rotated), reference) << shift;
  }
}

TEST(SpecialCases, SingleConcaveGetsOpposite) {
  const auto pac = ring(10);
  const std::vector<std::size_t> concave{3};
  const auto splits = apply_special_cases(pac, concave, {200, 200});
  ASSERT_EQ(splits.size(), 2u);
  EXPECT_EQ(splits[0], (SplitPoint{3, SplitKind::Concave}));
  EXPECT_EQ(splits[1], (SplitPoint{8, SplitKind::Inserted}));
}

TEST(SpecialCases, NothingToDo) {
  EXPECT_TRUE(apply_special_cases(ring(10), {}, {200, 200}).empty());
}

TEST(SpecialCases, LeftBorderRun) {
  const auto pac = polygon({{0, 20}, {0, 15}, {0, 10}, {0, 5}, {0, 0}, {6, 2}, {10, 10}, {6, 18}});
  const auto splits = apply_special_cases(pac, {}, {100, 100});
  ASSERT_EQ(splits.size(), 2u);
  EXPECT_EQ(splits[0], (SplitPoint{0, SplitKind::Boundary}));
  EXPECT_EQ(splits[1], (SplitPoint{4, SplitKind::Boundary}));
}

TEST(SpecialCases, BorderRunWrappingThroughZero) {
  const auto pac = polygon({{0, 10}, {0, 5}, {6, 2}, {10, 10}, {6, 18}, {0, 15}});
  const auto splits = apply_special_cases(pac, {}, {100, 100});
  ASSERT_EQ(splits.size(), 2u);
  EXPECT_EQ(splits[0].vertex, 1u);
  EXPECT_EQ(splits[1].vertex, 5u);
}

TEST(SpecialCases, BorderSplitsSuppressOppositeInsertion) {
  const auto pac = polygon({{0, 20}, {0, 15}, {0, 10}, {0, 5}, {0, 0}, {6, 2}, {10, 10}, {6, 18}});
  const std::vector<std::size_t> concave{6};
  const auto splits = apply_special_cases(pac, concave, {100, 100});
  std::vector<std::size_t> v;
  for (const auto& s : splits) v.push_back(s.vertex);
  EXPECT_EQ(v, (std::vector<std::size_t>{0, 4, 6}));
}

TEST(SplitSegments, TwoSplits) {
  const auto pac = ring(10);
  const std::vector<std::size_t> splits{2, 7};
  const auto segs = split_segments(pac, as_contour(pac), splits);
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[0].points.size(), 6u);
  EXPECT_EQ(segs[1].points.size(), 6u);
  EXPECT_EQ(segs[0].points.front(), pac.points[2]);
  EXPECT_EQ(segs[0].points.back(), pac.points[7]);
  EXPECT_EQ(segs[1].points.back(), pac.points[2]);
}

TEST(SplitSegments, NoSplitsOneClosedSegment) {
  const auto pac = ring(10);
  const auto segs = split_segments(pac, as_contour(pac), std::vector<std::size_t>{});
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_TRUE(segs[0].closed);
  EXPECT_EQ(segs[0].points, pac.points);
}

TEST(SplitSegments, ThreeSplits) {
  const auto pac = ring(9);
  const std::vector<std::size_t> splits{0, 3, 6};
  const auto segs = split_segments(pac, as_contour(pac), splits);
  ASSERT_EQ(segs.size(), 3u);
  for (const auto& s : segs) EXPECT_EQ(s.points.size(), 4u);
}

TEST(SplitSegments, RejectsBadSplits) {
  const auto pac = ring(10);
  const auto c = as_contour(pac);
  EXPECT_THROW(split_segments(pac, c, std::vector<std::size_t>{3, 3}), DomainError);
  EXPECT_THROW(split_segments(pac, c, std::vector<std::size_t>{5, 2}), DomainError);
  EXPECT_THROW(split_segments(pac, c, std::vector<std::size_t>{2, 10}), DomainError);
  EXPECT_THROW(split_segments(pac, c, std::vector<std::size_t>{4}), DomainError);
}

TEST(SplitSegments, TraceFollowsSourceContour) {
  const auto contour = trace_contour(only_blob(two_circles(200, 200, 20, 30)));
  const auto pac = approximate_polygon(contour, ConcavitySpec{});
  const auto concave = find_concave_points(pac, ConcavitySpec{});
  const auto splits = apply_special_cases(pac, concave, {200, 200});
  const auto segs = split_segments(pac, contour, splits);
  std::size_t total = 0;
  for (const auto& s : segs) {
    EXPECT_EQ(s.trace.front(), s.points.front());
    EXPECT_EQ(s.trace.back(), s.points.back());
    for (std::size_t k = 0; k < s.trace.size(); ++k)
      EXPECT_EQ(s.trace[k], contour.points[(s.trace_begin + k) % contour.size()]);
    total += s.trace.size() - 1;
  }
  EXPECT_EQ(total, contour.size());
}

TEST(SplitSegments, PartitionReproducesPolygon) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const auto contour = trace_contour(random_blob(rng));
    const auto pac = approximate_polygon(contour, ConcavitySpec{});
    auto splits = apply_special_cases(pac, find_concave_points(pac, ConcavitySpec{}), {80, 80});
    if (splits.size() == 1) continue;
    const auto segs = split_segments(pac, contour, splits);
    std::vector<Eigen::Vector2i> joined;
    for (const auto& s : segs) {
      EXPECT_GE(s.points.size(), 2u);
      if (!s.closed) EXPECT_NE(s.points.front(), s.points.back());
      joined.insert(joined.end(), s.points.begin(), s.closed ? s.points.end() : s.points.end() - 1);
    }
    ASSERT_EQ(joined.size(), pac.size());
    const std::size_t offset = splits.empty() ? 0 : splits.front().vertex;
    for (std::size_t k = 0; k < joined.size(); ++k) EXPECT_EQ(joined[k], pac.points[(k + offset) % pac.size()]);
  }
}

TEST(ConcavitySpec, Validation) {
  ConcavitySpec s;
  EXPECT_NO_THROW(s.validate());
  s.theta_min = 160;
  EXPECT_THROW(s.validate(), DomainError);
  s = ConcavitySpec{};
  s.n_step = 1;
  EXPECT_THROW(s.validate(), DomainError);
  s = ConcavitySpec{};
  s.d_th = 0;
  EXPECT_THROW(s.validate(), DomainError);
}

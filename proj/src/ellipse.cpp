#include "cellipse/ellipse.hpp"

#include <algorithm>
#include <iterator>
#include <limits>

namespace cellipse {

void CombineParams::validate() const {
  if (!(dis_th > 0) || !(e_th > 0) || !(e_th < 1) || !(d_min_th > 0) ||
      !(separation_factor > 0))
    throw DomainError("combine parameters must be positive with eTh < 1");
}

CellCandidate make_candidate(std::vector<Eigen::Vector2d> points, std::size_t segment_index) {
  CellCandidate c;
  c.points = std::move(points);
  c.segments = {segment_index};
  c.fit = try_fit_ellipse<double>(c.points);
  return c;
}

bool passes_selection(const std::optional<EllipseFit>& fit, const CombineParams& params) {
  return fit && fit->quality.mean_algebraic_distance < params.dis_th &&
         fit->quality.axis_ratio > params.e_th;
}

Selection select_ellipses(std::vector<CellCandidate> candidates, const CombineParams& params) {
  Selection out;
  for (auto& c : candidates) {
    if (passes_selection(c.fit, params))
      out.selected.push_back(std::move(c));
    else
      out.leftovers.push_back(std::move(c));
  }
  return out;
}

bool case1_keep_separate(const Ellipse& ei, const Ellipse& ej, const Ellipse& merged,
                         const CombineParams& params) {
  const double di = (ei.center - merged.center).norm();
  const double dj = (ej.center - merged.center).norm();
  const double dij = (ei.center - ej.center).norm();
  return (di > params.d_min_th && dj > params.d_min_th) ||
         dij > params.separation_factor * params.d_min_th;
}

bool case2_better_fit(double d_i, double d_j, double d_ij) { return d_ij < d_i && d_ij < d_j; }

namespace {

CellCandidate merge(const CellCandidate& a, const CellCandidate& b) {
  CellCandidate out;
  out.points.reserve(a.points.size() + b.points.size());
  out.points = a.points;
  out.points.insert(out.points.end(), b.points.begin(), b.points.end());
  std::merge(a.segments.begin(), a.segments.end(), b.segments.begin(), b.segments.end(),
             std::back_inserter(out.segments));
  out.fit = try_fit_ellipse<double>(out.points);
  return out;
}

}  // namespace

std::vector<CellCandidate> combine_ellipses(std::vector<CellCandidate> selected,
                                            const CombineParams& params, CombineLog* log) {
  // Every entry must carry a fit; drop the ones that do not.
  std::erase_if(selected, [](const CellCandidate& c) { return !c.fit.has_value(); });
  std::stable_sort(selected.begin(), selected.end(),
                   [](const CellCandidate& a, const CellCandidate& b) {
                     return a.first_segment() < b.first_segment();
                   });

  bool merged_any = true;
  while (merged_any) {
    merged_any = false;
    if (log) ++log->scans;
    for (std::size_t i = 0; i < selected.size() && !merged_any; ++i) {
      for (std::size_t j = i + 1; j < selected.size(); ++j) {
        if (log) ++log->pair_evaluations;
        CellCandidate joined = merge(selected[i], selected[j]);
        if (!joined.fit) continue;
        const auto& fi = *selected[i].fit;
        const auto& fj = *selected[j].fit;
        const bool case1 = case1_keep_separate(fi.ellipse, fj.ellipse, joined.fit->ellipse, params);
        if (case1 ||
            !case2_better_fit(fi.quality.mean_algebraic_distance,
                              fj.quality.mean_algebraic_distance,
                              joined.fit->quality.mean_algebraic_distance))
          continue;
        if (log) {
          log->merges.push_back({i, j, fi.ellipse.center, fj.ellipse.center,
                                 joined.fit->ellipse.center, case1, selected.size(),
                                 selected.size() - 1});
        }
        selected[i] = std::move(joined);
        selected.erase(selected.begin() + static_cast<std::ptrdiff_t>(j));
        merged_any = true;  // restart from the first candidate
        break;
      }
    }
  }
  return selected;
}

std::vector<CellCandidate> refine_with_leftovers(std::vector<CellCandidate> combined,
                                                 std::vector<CellCandidate> leftovers,
                                                 const CombineParams& params) {
  std::stable_sort(leftovers.begin(), leftovers.end(),
                   [](const CellCandidate& a, const CellCandidate& b) {
                     return a.points.size() < b.points.size();
                   });
  for (const auto& leftover : leftovers) {
    std::size_t best = combined.size();
    double best_distance = std::numeric_limits<double>::infinity();
    CellCandidate best_joined;
    for (std::size_t e = 0; e < combined.size(); ++e) {
      CellCandidate joined = merge(combined[e], leftover);
      if (!passes_selection(joined.fit, params)) continue;
      const double d = joined.fit->quality.mean_algebraic_distance;
      if (d < best_distance) {
        best_distance = d;
        best = e;
        best_joined = std::move(joined);
      }
    }
    if (best < combined.size()) combined[best] = std::move(best_joined);
  }
  return combined;
}

}  // namespace cellipse

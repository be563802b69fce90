#include "cellipse/segmentation.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include "cellipse/errors.hpp"

namespace cellipse {

namespace {

std::size_t count_distinct_colors(const PixelImage& img, std::size_t stop_at) {
  std::vector<std::uint64_t> seen((1u << 24) / 64, 0);
  std::size_t distinct = 0;
  const auto data = img.data();
  for (std::size_t i = 0; i + 2 < data.size(); i += 3) {
    const std::uint32_t key = (std::uint32_t{data[i]} << 16) | (std::uint32_t{data[i + 1]} << 8) |
                              std::uint32_t{data[i + 2]};
    auto& word = seen[key >> 6];
    const std::uint64_t bit = std::uint64_t{1} << (key & 63);
    if (!(word & bit)) {
      word |= bit;
      if (++distinct >= stop_at) return distinct;
    }
  }
  return distinct;
}

double squared_distance(const Eigen::Vector3d& a, const double* p) {
  const double d0 = a(0) - p[0], d1 = a(1) - p[1], d2 = a(2) - p[2];
  return d0 * d0 + d1 * d1 + d2 * d2;
}

// k-means++ seeding.
std::vector<Eigen::Vector3d> seed_centroids(const std::vector<double>& px, std::size_t n, int k,
                                            std::mt19937_64& rng) {
  std::vector<Eigen::Vector3d> centroids;
  centroids.reserve(static_cast<std::size_t>(k));
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const std::size_t first = pick(rng);
  centroids.emplace_back(px[first * 3], px[first * 3 + 1], px[first * 3 + 2]);

  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  while (centroids.size() < static_cast<std::size_t>(k)) {
    const auto& last = centroids.back();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(last, &px[i * 3]));
      total += nearest[i];
    }
    std::uniform_real_distribution<double> u(0.0, total);
    const double target = u(rng);
    double acc = 0.0;
    std::size_t chosen = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (nearest[i] <= 0.0) continue;
      acc += nearest[i];
      chosen = i;
      if (acc > target) break;
    }
    centroids.emplace_back(px[chosen * 3], px[chosen * 3 + 1], px[chosen * 3 + 2]);
  }
  return centroids;
}

}  // namespace

KMeansModel kmeans_cluster(const PixelImage& img, const KMeansOptions& options) {
  const int k = options.k;
  if (k < 2) throw DomainError("k-means needs k >= 2");
  if (options.max_iter < 1 || !(options.tol > 0)) throw DomainError("invalid k-means options");
  if (count_distinct_colors(img, static_cast<std::size_t>(k)) < static_cast<std::size_t>(k))
    throw DegenerateInputError("image has fewer distinct colours than k = " + std::to_string(k));

  const std::size_t n = img.pixel_count();
  std::vector<double> px(img.data().begin(), img.data().end());
  std::mt19937_64 rng(options.seed);

  KMeansModel model;
  model.k = k;
  model.centroids = seed_centroids(px, n, k, rng);
  model.assignments.assign(n, 0);

  std::vector<double> distance(n);
  for (int iter = 0; iter < options.max_iter; ++iter) {
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* p = &px[i * 3];
      int best = 0;
      double best_d = squared_distance(model.centroids[0], p);
      for (int c = 1; c < k; ++c) {
        const double d = squared_distance(model.centroids[static_cast<std::size_t>(c)], p);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      model.assignments[i] = best;
      distance[i] = best_d;
      objective += best_d;
    }
    model.objective_history.push_back(objective);
    model.iterations = iter + 1;

    std::vector<Eigen::Vector3d> sums(static_cast<std::size_t>(k), Eigen::Vector3d::Zero());
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(model.assignments[i]);
      sums[c] += Eigen::Vector3d(px[i * 3], px[i * 3 + 1], px[i * 3 + 2]);
      ++counts[c];
    }

    std::vector<Eigen::Vector3d> next(static_cast<std::size_t>(k));
    for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
      if (counts[c] > 0) {
        next[c] = sums[c] / static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: move it onto the worst-served pixel.
      const auto far = static_cast<std::size_t>(
          std::max_element(distance.begin(), distance.end()) - distance.begin());
      next[c] = Eigen::Vector3d(px[far * 3], px[far * 3 + 1], px[far * 3 + 2]);
      distance[far] = -1.0;
    }

    double movement = 0.0;
    for (std::size_t c = 0; c < next.size(); ++c)
      movement = std::max(movement, (next[c] - model.centroids[c]).norm());
    model.centroids = std::move(next);
    if (movement < options.tol) break;
  }
  return model;
}

int identify_background_label(const LabelMap& labelmap) {
  int k = labelmap.k;
  for (int l : labelmap.labels) k = std::max(k, l + 1);
  std::vector<std::size_t> border(static_cast<std::size_t>(k), 0), total(static_cast<std::size_t>(k), 0);
  for (int y = 0; y < labelmap.height; ++y) {
    for (int x = 0; x < labelmap.width; ++x) {
      const auto l = static_cast<std::size_t>(labelmap.at(x, y));
      ++total[l];
      if (x == 0 || y == 0 || x == labelmap.width - 1 || y == labelmap.height - 1) ++border[l];
    }
  }
  int best = 0;
  for (int l = 1; l < k; ++l) {
    const auto i = static_cast<std::size_t>(l), b = static_cast<std::size_t>(best);
    if (border[i] > border[b] || (border[i] == border[b] && total[i] > total[b])) best = l;
  }
  return best;
}

LabelMap segment_image(const PixelImage& img, const KMeansOptions& options) {
  KMeansModel model = kmeans_cluster(img, options);
  LabelMap map;
  map.width = img.width();
  map.height = img.height();
  map.k = model.k;
  map.labels = std::move(model.assignments);
  map.background_label = identify_background_label(map);
  return map;
}

BinaryMask fill_holes(const BinaryMask& mask) {
  const int w = mask.width(), h = mask.height();
  BinaryMask outside(w, h, false);
  std::vector<Eigen::Vector2i> stack;
  auto seed = [&](int x, int y) {
    if (!mask.at(x, y) && !outside.at(x, y)) {
      outside.set(x, y, true);
      stack.emplace_back(x, y);
    }
  };
  for (int x = 0; x < w; ++x) {
    seed(x, 0);
    seed(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    seed(0, y);
    seed(w - 1, y);
  }
  static constexpr int kDx[4] = {1, -1, 0, 0};
  static constexpr int kDy[4] = {0, 0, 1, -1};
  while (!stack.empty()) {
    const Eigen::Vector2i p = stack.back();
    stack.pop_back();
    for (int d = 0; d < 4; ++d) {
      const int x = p.x() + kDx[d], y = p.y() + kDy[d];
      if (mask.contains(x, y)) seed(x, y);
    }
  }

  BinaryMask filled(w, h, false);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) filled.set(x, y, !outside.at(x, y));
  return filled;
}

BinaryMask class_mask(const LabelMap& labelmap, int class_label) {
  BinaryMask mask(labelmap.width, labelmap.height, false);
  for (int y = 0; y < labelmap.height; ++y)
    for (int x = 0; x < labelmap.width; ++x)
      if (labelmap.at(x, y) == class_label) mask.set(x, y, true);
  return mask;
}

std::vector<Blob> connected_components(const BinaryMask& mask, int class_label,
                                       std::size_t min_area) {
  const int w = mask.width(), h = mask.height();
  BinaryMask visited(w, h, false);
  std::vector<Blob> blobs;
  std::vector<Eigen::Vector2i> stack;

  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      if (!mask.at(x0, y0) || visited.at(x0, y0)) continue;
      Blob blob;
      blob.class_label = class_label;
      blob.bounding_box = {x0, y0, x0, y0};
      visited.set(x0, y0, true);
      stack.emplace_back(x0, y0);
      while (!stack.empty()) {
        const Eigen::Vector2i p = stack.back();
        stack.pop_back();
        blob.pixels.push_back(p);
        auto& bb = blob.bounding_box;
        bb.min_x = std::min(bb.min_x, p.x());
        bb.max_x = std::max(bb.max_x, p.x());
        bb.min_y = std::min(bb.min_y, p.y());
        bb.max_y = std::max(bb.max_y, p.y());
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int x = p.x() + dx, y = p.y() + dy;
            if ((dx || dy) && mask.contains(x, y) && mask.at(x, y) && !visited.at(x, y)) {
              visited.set(x, y, true);
              stack.emplace_back(x, y);
            }
          }
        }
      }
      if (blob.area() >= min_area) {
        std::sort(blob.pixels.begin(), blob.pixels.end(),
                  [](const Eigen::Vector2i& a, const Eigen::Vector2i& b) {
                    return a.y() != b.y() ? a.y() < b.y() : a.x() < b.x();
                  });
        blobs.push_back(std::move(blob));
      }
    }
  }
  return blobs;
}

std::vector<Blob> extract_blobs(const LabelMap& labelmap, int class_label, std::size_t min_area) {
  if (class_label == labelmap.background_label)
    throw DomainError("extract_blobs: class is the background label");
  return connected_components(fill_holes(class_mask(labelmap, class_label)), class_label, min_area);
}

}  // namespace cellipse

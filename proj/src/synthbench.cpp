#include "cellipse/synthbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <tuple>

#include "cellipse/errors.hpp"
#include "keyvalue.hpp"

namespace cellipse {

void SceneSpec::validate() const {
  if (width < 1 || height < 1) throw ConfigError("scene dimensions must be positive");
  if (!(b_min > 0) || !(a_min >= b_min) || !(a_max >= a_min) || !(b_max >= b_min))
    throw ConfigError("axis ranges must satisfy a_max >= a_min >= b_min > 0");
  if (!(max_overlap_fraction >= 0) || !(max_overlap_fraction < 1))
    throw ConfigError("max_overlap_fraction must lie in [0, 1)");
  if (!(noise_sigma >= 0)) throw ConfigError("noise_sigma must be non-negative");
  if (class_colors.size() < n_cells.size())
    throw ConfigError("every class needs a colour");
  for (int n : n_cells)
    if (n < 0) throw ConfigError("cell counts must be non-negative");
}

// ---------------------------------------------------------------------------
// Spec files

namespace {

Rgb parse_rgb(const detail::KeyValue& kv, std::string_view s) {
  const auto parts = detail::split(s, ',');
  if (parts.size() != 3) detail::bad_value(kv);
  Rgb c{};
  for (std::size_t i = 0; i < 3; ++i) {
    const int v = detail::parse_number<int>(kv, parts[i]);
    if (v < 0 || v > 255) detail::bad_value(kv);
    c[i] = static_cast<std::uint8_t>(v);
  }
  return c;
}

std::string format_rgb(const Rgb& c) {
  return std::to_string(c[0]) + "," + std::to_string(c[1]) + "," + std::to_string(c[2]);
}

}  // namespace

SceneSpec parse_scene_spec(std::string_view text) {
  using detail::parse_number;
  SceneSpec spec;
  for (const auto& kv : detail::parse_key_values(text)) {
    if (kv.key == "width") {
      spec.width = parse_number<int>(kv);
    } else if (kv.key == "height") {
      spec.height = parse_number<int>(kv);
    } else if (kv.key == "n_cells") {
      spec.n_cells.clear();
      for (auto part : detail::split(kv.value, ',')) spec.n_cells.push_back(parse_number<int>(kv, part));
    } else if (kv.key == "a_min") {
      spec.a_min = parse_number<double>(kv);
    } else if (kv.key == "a_max") {
      spec.a_max = parse_number<double>(kv);
    } else if (kv.key == "b_min") {
      spec.b_min = parse_number<double>(kv);
    } else if (kv.key == "b_max") {
      spec.b_max = parse_number<double>(kv);
    } else if (kv.key == "max_overlap_fraction") {
      spec.max_overlap_fraction = parse_number<double>(kv);
    } else if (kv.key == "class_colors") {
      spec.class_colors.clear();
      for (auto part : detail::split(kv.value, ';')) spec.class_colors.push_back(parse_rgb(kv, part));
    } else if (kv.key == "background") {
      spec.background = parse_rgb(kv, kv.value);
    } else if (kv.key == "noise_sigma") {
      spec.noise_sigma = parse_number<double>(kv);
    } else if (kv.key == "seed") {
      spec.seed = parse_number<std::uint64_t>(kv);
    } else {
      throw ConfigError("line " + std::to_string(kv.line) + ": unknown key " + kv.key);
    }
  }
  spec.validate();
  return spec;
}

SceneSpec load_scene_spec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open scene spec " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scene_spec(buf.str());
}

std::string format_scene_spec(const SceneSpec& spec) {
  using detail::format_number;
  std::string out;
  out += "width = " + std::to_string(spec.width) + '\n';
  out += "height = " + std::to_string(spec.height) + '\n';
  std::string counts;
  for (std::size_t i = 0; i < spec.n_cells.size(); ++i)
    counts += (i ? "," : "") + std::to_string(spec.n_cells[i]);
  out += "n_cells = " + counts + '\n';
  out += "a_min = " + format_number(spec.a_min) + '\n';
  out += "a_max = " + format_number(spec.a_max) + '\n';
  out += "b_min = " + format_number(spec.b_min) + '\n';
  out += "b_max = " + format_number(spec.b_max) + '\n';
  out += "max_overlap_fraction = " + format_number(spec.max_overlap_fraction) + '\n';
  std::string colors;
  for (std::size_t i = 0; i < spec.class_colors.size(); ++i)
    colors += (i ? ";" : "") + format_rgb(spec.class_colors[i]);
  out += "class_colors = " + colors + '\n';
  out += "background = " + format_rgb(spec.background) + '\n';
  out += "noise_sigma = " + format_number(spec.noise_sigma) + '\n';
  out += "seed = " + std::to_string(spec.seed) + '\n';
  return out;
}

// ---------------------------------------------------------------------------
// Scene generation

namespace {

BoundingBox ellipse_box(const Ellipse& e) {
  const double th = e.orientation_deg * std::numbers::pi / 180.0;
  const double a = e.semi_major, b = e.semi_minor;
  const double hx = std::sqrt(a * a * std::cos(th) * std::cos(th) + b * b * std::sin(th) * std::sin(th));
  const double hy = std::sqrt(a * a * std::sin(th) * std::sin(th) + b * b * std::cos(th) * std::cos(th));
  return {static_cast<int>(std::floor(e.center.x() - hx)), static_cast<int>(std::floor(e.center.y() - hy)),
          static_cast<int>(std::ceil(e.center.x() + hx)), static_cast<int>(std::ceil(e.center.y() + hy))};
}

bool boxes_intersect(const BoundingBox& a, const BoundingBox& b) {
  return a.min_x <= b.max_x && b.min_x <= a.max_x && a.min_y <= b.max_y && b.min_y <= a.max_y;
}

struct Placed {
  Ellipse ellipse;
  BoundingBox box;
  std::size_t area = 0;
};

}  // namespace

std::vector<Eigen::Vector2i> rasterize_ellipse(const Ellipse& e, int width, int height) {
  const BoundingBox box = ellipse_box(e);
  std::vector<Eigen::Vector2i> pixels;
  for (int y = std::max(box.min_y, 0); y <= std::min(box.max_y, height - 1); ++y)
    for (int x = std::max(box.min_x, 0); x <= std::min(box.max_x, width - 1); ++x)
      if (e.contains(Eigen::Vector2d(x, y))) pixels.emplace_back(x, y);
  return pixels;
}

Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> ux(0.0, spec.width), uy(0.0, spec.height);
  std::uniform_real_distribution<double> ua(spec.a_min, spec.a_max), uangle(0.0, 180.0);

  Scene scene;
  scene.image = PixelImage(spec.width, spec.height);
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) scene.image.set(x, y, spec.background);

  std::vector<Placed> placed;
  for (std::size_t cls = 0; cls < spec.n_cells.size(); ++cls) {
    for (int n = 0; n < spec.n_cells[cls]; ++n) {
      bool ok = false;
      for (int attempt = 0; attempt < 10000 && !ok; ++attempt) {
        Ellipse e;
        e.center = {ux(rng), uy(rng)};
        e.semi_major = ua(rng);
        std::uniform_real_distribution<double> ub(spec.b_min, std::min(spec.b_max, e.semi_major));
        e.semi_minor = ub(rng);
        e.orientation_deg = uangle(rng);

        const auto pixels = rasterize_ellipse(e, spec.width, spec.height);
        if (pixels.empty()) continue;
        const BoundingBox box = ellipse_box(e);
        ok = true;
        for (const auto& other : placed) {
          if (!boxes_intersect(box, other.box)) continue;
          std::size_t shared = 0;
          for (const auto& p : pixels)
            if (other.ellipse.contains(p.cast<double>())) ++shared;
          const double cap =
              spec.max_overlap_fraction * static_cast<double>(std::min(pixels.size(), other.area));
          if (static_cast<double>(shared) > cap) {
            ok = false;
            break;
          }
        }
        if (!ok) continue;
        placed.push_back({e, box, pixels.size()});
        scene.truth.push_back({static_cast<int>(cls), e});
        for (const auto& p : pixels) scene.image.set(p.x(), p.y(), spec.class_colors[cls]);
      }
      if (!ok) throw CapacityError("could not place cell " + std::to_string(n) + " of class " +
                                   std::to_string(cls) + " after 10000 attempts");
    }
  }

  if (spec.noise_sigma > 0) {
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (auto& v : scene.image.data())
      v = static_cast<std::uint8_t>(std::clamp(std::round(v + noise(rng)), 0.0, 255.0));
  }
  return scene;
}

// ---------------------------------------------------------------------------
// Scoring

std::vector<Match> match_detections(std::span<const CellRecord> detected, const GroundTruth& truth,
                                    double max_center_dist) {
  if (!(max_center_dist > 0)) throw DomainError("max_center_dist must be positive");
  std::vector<Match> candidates;
  for (std::size_t d = 0; d < detected.size(); ++d) {
    for (std::size_t t = 0; t < truth.size(); ++t) {
      const double dist = (detected[d].ellipse.center - truth[t].ellipse.center).norm();
      if (dist <= max_center_dist) candidates.push_back({d, t, dist});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Match& a, const Match& b) {
    return std::tie(a.distance, a.detected, a.truth) < std::tie(b.distance, b.detected, b.truth);
  });
  std::vector<bool> used_d(detected.size()), used_t(truth.size());
  std::vector<Match> matches;
  for (const auto& m : candidates) {
    if (used_d[m.detected] || used_t[m.truth]) continue;
    used_d[m.detected] = used_t[m.truth] = true;
    matches.push_back(m);
  }
  return matches;
}

Metrics evaluate(std::span<const CellRecord> detected, const GroundTruth& truth,
                 double max_center_dist) {
  Metrics m;
  m.detected = detected.size();
  m.truth = truth.size();
  const double diff = std::abs(static_cast<double>(m.detected) - static_cast<double>(m.truth));
  m.count_error = truth.empty() ? diff : diff / static_cast<double>(m.truth);

  for (const auto& t : truth) m.mean_truth_area += t.ellipse.area();
  if (!truth.empty()) m.mean_truth_area /= static_cast<double>(truth.size());

  const auto matches = match_detections(detected, truth, max_center_dist);
  m.matched = matches.size();
  m.matched_fraction = truth.empty() ? 1.0 : static_cast<double>(m.matched) / static_cast<double>(m.truth);
  if (!matches.empty()) {
    double sq = 0.0, area = 0.0;
    for (const auto& match : matches) {
      sq += match.distance * match.distance;
      area += std::abs(detected[match.detected].ellipse.area() - truth[match.truth].ellipse.area());
    }
    m.center_rmse = std::sqrt(sq / static_cast<double>(matches.size()));
    m.area_mae = area / static_cast<double>(matches.size());
  }
  return m;
}

std::vector<CellRecord> truth_as_records(const GroundTruth& truth) {
  std::vector<CellRecord> out;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    CellRecord r;
    r.cell_id = static_cast<int>(i);
    r.class_label = truth[i].class_label;
    r.ellipse = truth[i].ellipse;
    r.area = truth[i].ellipse.area();
    out.push_back(r);
  }
  return out;
}

std::vector<SceneOutcome> run_bench(const BenchOptions& options) {
  std::vector<SceneOutcome> outcomes;
  const double cap =
      options.max_center_dist > 0 ? options.max_center_dist : options.config.combine.d_min_th;
  for (int i = 0; i < options.scenes; ++i) {
    SceneSpec spec = options.spec;
    spec.seed = options.spec.seed + static_cast<std::uint64_t>(i);
    const auto [lo, hi] = options.cells_per_scene;
    if (hi > 0 && !spec.n_cells.empty()) {
      std::mt19937_64 rng(derive_seed(spec.seed, "cells_per_scene"));
      const int total = std::uniform_int_distribution<int>(lo, hi)(rng);
      const int classes = static_cast<int>(spec.n_cells.size());
      for (int c = 0; c < classes; ++c)
        spec.n_cells[static_cast<std::size_t>(c)] = total / classes + (c < total % classes ? 1 : 0);
    }

    SceneOutcome out;
    out.scene_id = i;
    const Scene scene = generate_scene(spec);
    const auto start = std::chrono::steady_clock::now();
    out.detection = run_pipeline(scene.image, options.config, "scene_" + std::to_string(i));
    out.milliseconds =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    out.metrics = evaluate(out.detection.cells, scene.truth, cap);
    outcomes.push_back(std::move(out));
  }
  return outcomes;
}

std::string format_metrics_csv(std::span<const SceneOutcome> outcomes) {
  std::string out = "scene_id,count_error,matched_frac,center_rmse,area_mae\n";
  for (const auto& o : outcomes) {
    out += std::to_string(o.scene_id) + ',' + format_fixed(o.metrics.count_error, 6) + ',' +
           format_fixed(o.metrics.matched_fraction, 6) + ',' +
           format_fixed(o.metrics.center_rmse, 6) + ',' + format_fixed(o.metrics.area_mae, 6) + '\n';
  }
  return out;
}

}  // namespace cellipse

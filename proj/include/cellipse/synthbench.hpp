#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cellipse/ellipse.hpp"
#include "cellipse/pipeline.hpp"
#include "cellipse/raster.hpp"

namespace cellipse {

struct SceneSpec {
  int width = 512;
  int height = 512;
  /// Cell count per class; class c is drawn with class_colors[c].
  std::vector<int> n_cells{10, 10};
  double a_min = 8.0, a_max = 20.0;
  double b_min = 8.0, b_max = 20.0;
  double max_overlap_fraction = 0.3;
  std::vector<Rgb> class_colors{{200, 60, 60}, {60, 200, 60}};
  Rgb background{30, 30, 90};
  double noise_sigma = 5.0;
  std::uint64_t seed = 1;

  /// Throws ConfigError when the spec is inconsistent.
  void validate() const;
};

SceneSpec parse_scene_spec(std::string_view text);
SceneSpec load_scene_spec(const std::filesystem::path& path);
std::string format_scene_spec(const SceneSpec& spec);

struct TruthCell {
  int class_label = 0;
  Ellipse ellipse;
};

using GroundTruth = std::vector<TruthCell>;

struct Scene {
  PixelImage image;
  GroundTruth truth;
};

/// Pixels (integer centres) inside `e` and inside a width x height frame.
std::vector<Eigen::Vector2i> rasterize_ellipse(const Ellipse& e, int width, int height);

/// Rejection-sampled, non-crowding placement of filled ellipses plus
/// per-channel Gaussian noise. Throws CapacityError after 10000 failed
/// placements of one cell.
Scene generate_scene(const SceneSpec& spec);

struct Match {
  std::size_t detected = 0;
  std::size_t truth = 0;
  double distance = 0.0;
};

/// Greedy one-to-one matching by ascending centre distance, up to max_center_dist.
std::vector<Match> match_detections(std::span<const CellRecord> detected, const GroundTruth& truth,
                                    double max_center_dist);

struct Metrics {
  /// |#detected - #truth| / #truth, or the absolute difference if truth is empty.
  double count_error = 0.0;
  double matched_fraction = 0.0;
  double center_rmse = 0.0;
  /// Mean |detected area - true area| over matches, px^2.
  double area_mae = 0.0;
  std::size_t detected = 0;
  std::size_t truth = 0;
  std::size_t matched = 0;
  double mean_truth_area = 0.0;
};

Metrics evaluate(std::span<const CellRecord> detected, const GroundTruth& truth,
                 double max_center_dist);

/// Cell records describing the ground truth exactly.
std::vector<CellRecord> truth_as_records(const GroundTruth& truth);

struct BenchOptions {
  int scenes = 10;
  SceneSpec spec;
  PipelineConfig config;
  /// Zero means "use config.combine.d_min_th".
  double max_center_dist = 0.0;
  /// Inclusive range for the total cell count of each scene, spread evenly
  /// over the classes. {0,0} keeps spec.n_cells.
  std::pair<int, int> cells_per_scene{0, 0};
};

struct SceneOutcome {
  int scene_id = 0;
  Metrics metrics;
  DetectionResult detection;
  double milliseconds = 0.0;
};

/// Runs the detector over `scenes` generated scenes (seeds spec.seed + i).
std::vector<SceneOutcome> run_bench(const BenchOptions& options);

/// `scene_id,count_error,matched_frac,center_rmse,area_mae`.
std::string format_metrics_csv(std::span<const SceneOutcome> outcomes);

}  // namespace cellipse

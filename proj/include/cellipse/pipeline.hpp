#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cellipse/contour.hpp"
#include "cellipse/ellipse.hpp"
#include "cellipse/raster.hpp"
#include "cellipse/segmentation.hpp"

namespace cellipse {

/// Every tunable of the detector. Defaults:
/// (k = 3, dTh = 3.5, 35..155 degrees, disTh = 0.03, eTh = 0.2, dMinTh = 4).
struct PipelineConfig {
  int k = 3;
  bool enable_decorrelation = true;
  double target_sigma = 50.0;

  std::uint64_t seed = 0;
  double kmeans_tol = 0.5;
  int kmeans_max_iter = 100;
  std::size_t min_area = 10;

  ConcavitySpec concavity;
  /// Half-width of the moving average applied to boundary pixels before
  /// ellipse fitting; removes the pixel staircase.
  int contour_smoothing = 2;
  CombineParams combine;

  /// Added to fitted semi-axes: contour points are boundary pixel centres,
  /// half a pixel inside the object edge.
  double edge_offset = 0.5;
  double histogram_bin_width = 50.0;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

/// Parses flat `key = value` text (`#` starts a comment). Keys not present keep
/// their defaults; unknown keys and bad values throw ConfigError.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);
/// Emits every key, one per line, in a form parse_config reads back.
std::string format_config(const PipelineConfig& config);

struct CellRecord {
  int cell_id = 0;
  int class_label = 0;
  Ellipse ellipse;
  double area = 0.0;
  int source_blob = 0;
  /// Set when the cell is the blob's second-moment ellipse rather than a fit.
  bool low_confidence = false;
};

struct StageTiming {
  std::string stage;
  double milliseconds = 0.0;
};

struct DetectionResult {
  std::string image_id;
  std::vector<CellRecord> cells;
  std::map<int, std::size_t> per_class_counts;
  std::vector<StageTiming> timing;
  double total_milliseconds = 0.0;
};

/// Intermediate products of splitting one blob, kept for inspection.
struct BlobTrace {
  Contour contour;
  ApproxContour approx;
  std::vector<std::size_t> concave;
  std::vector<SplitPoint> splits;
  std::vector<ContourSegment> segments;
};

struct BlobCell {
  Ellipse ellipse;
  bool low_confidence = false;
};

/// Ellipse with the blob's centroid and second moments.
Ellipse moments_ellipse(const Blob& blob);

/// Contour processing and ellipse fitting for a single blob.
std::vector<BlobCell> detect_cells_in_blob(const Blob& blob, const ImageBounds& bounds,
                                           const PipelineConfig& config,
                                           BlobTrace* trace = nullptr);

/// Seed used for one image: mixes the configured seed with the image id.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view image_id);

/// Whole detector on one image. Throws DegenerateInputError when the image
/// cannot be clustered; per-blob fit failures never abort.
DetectionResult run_pipeline(const PixelImage& img, const PipelineConfig& config,
                             std::string image_id = "image");

/// `image_id,cell_id,class,cx,cy,major,minor,angle_deg,area`; semi-axes, three decimals.
std::string format_csv(const DetectionResult& result);
void write_csv(const DetectionResult& result, const std::filesystem::path& path);

struct HistogramBin {
  double bin_start = 0.0;
  std::size_t count = 0;

  friend bool operator==(const HistogramBin&, const HistogramBin&) = default;
};

/// Half-open bins [i*w, (i+1)*w) from zero to the last non-empty bin.
std::vector<HistogramBin> area_histogram(const DetectionResult& result, int class_label,
                                         double bin_width);
std::string format_histogram_csv(std::span<const HistogramBin> bins);

/// Fixed-point with `decimals` digits, ties to even on the binary value.
std::string format_fixed(double value, int decimals = 3);

/// Writes `text` to `path`, throwing IoError on failure.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace cellipse

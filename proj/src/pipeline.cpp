#include "cellipse/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "cellipse/errors.hpp"
#include "cellipse/preprocess.hpp"

namespace cellipse {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::vector<Eigen::Vector2d> segment_points(const ContourSegment& seg,
                                            const std::vector<Eigen::Vector2d>& smoothed) {
  std::vector<Eigen::Vector2d> out;
  out.reserve(seg.trace.size());
  for (std::size_t k = 0; k < seg.trace.size(); ++k)
    out.push_back(smoothed[(seg.trace_begin + k) % smoothed.size()]);
  return out;
}

BlobCell fitted_cell(const EllipseFit& fit, double edge_offset) {
  BlobCell cell;
  cell.ellipse = fit.ellipse;
  cell.ellipse.semi_major += edge_offset;
  cell.ellipse.semi_minor += edge_offset;
  return cell;
}

}  // namespace

Ellipse moments_ellipse(const Blob& blob) {
  if (blob.pixels.empty()) throw DomainError("moments_ellipse: empty blob");
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : blob.pixels) mean += p.cast<double>();
  mean /= static_cast<double>(blob.pixels.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : blob.pixels) {
    const Eigen::Vector2d d = p.cast<double>() - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(blob.pixels.size());
  // Each pixel is a unit square, not a point.
  cov.diagonal().array() += 1.0 / 12.0;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  Ellipse e;
  e.center = mean;
  e.semi_major = 2.0 * std::sqrt(std::max(eig.eigenvalues()(1), 0.0));
  e.semi_minor = 2.0 * std::sqrt(std::max(eig.eigenvalues()(0), 0.0));
  const Eigen::Vector2d axis = eig.eigenvectors().col(1);
  double angle = std::atan2(axis.y(), axis.x()) * 180.0 / std::numbers::pi;
  angle = std::fmod(angle + 360.0, 180.0);
  e.orientation_deg = angle >= 180.0 ? angle - 180.0 : angle;
  return e;
}

std::vector<BlobCell> detect_cells_in_blob(const Blob& blob, const ImageBounds& bounds,
                                           const PipelineConfig& config, BlobTrace* trace) {
  BlobTrace local;
  BlobTrace& tr = trace ? *trace : local;
  std::vector<BlobCell> cells;

  tr.contour = trace_contour(blob);
  if (tr.contour.degenerate || tr.contour.size() < 3) return cells;

  tr.approx = approximate_polygon(tr.contour, config.concavity);
  tr.concave = find_concave_points(tr.approx, config.concavity);
  tr.splits = apply_special_cases(tr.approx, tr.concave, bounds);
  tr.segments = split_segments(tr.approx, tr.contour, tr.splits);

  const auto smoothed = smooth_contour(tr.contour, config.contour_smoothing);
  std::vector<CellCandidate> candidates;
  candidates.reserve(tr.segments.size());
  for (std::size_t s = 0; s < tr.segments.size(); ++s)
    candidates.push_back(make_candidate(segment_points(tr.segments[s], smoothed), s));

  std::vector<CellCandidate> entities;
  if (tr.splits.empty()) {
    if (passes_selection(candidates.front().fit, config.combine))
      entities.push_back(std::move(candidates.front()));
  } else {
    Selection sel = select_ellipses(std::move(candidates), config.combine);
    entities = combine_ellipses(std::move(sel.selected), config.combine);
    entities = refine_with_leftovers(std::move(entities), std::move(sel.leftovers), config.combine);
  }

  for (const auto& e : entities) cells.push_back(fitted_cell(*e.fit, config.edge_offset));
  if (cells.empty()) cells.push_back({moments_ellipse(blob), true});
  return cells;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view image_id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : image_id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  // splitmix64 finaliser
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

DetectionResult run_pipeline(const PixelImage& img, const PipelineConfig& config,
                             std::string image_id) {
  config.validate();
  const auto start = Clock::now();
  DetectionResult result;
  result.image_id = std::move(image_id);

  auto t = Clock::now();
  const PixelImage prepared =
      config.enable_decorrelation ? decorrelation_stretch(img, config.target_sigma) : img;
  result.timing.push_back({"preprocess", elapsed_ms(t)});

  t = Clock::now();
  KMeansOptions km;
  km.k = config.k;
  km.seed = derive_seed(config.seed, result.image_id);
  km.tol = config.kmeans_tol;
  km.max_iter = config.kmeans_max_iter;
  const LabelMap labels = segment_image(prepared, km);
  result.timing.push_back({"segmentation", elapsed_ms(t)});

  double blob_ms = 0.0, cell_ms = 0.0;
  const ImageBounds bounds{img.width(), img.height()};
  int blob_id = 0;
  for (int cls = 0; cls < labels.k; ++cls) {
    if (cls == labels.background_label) continue;
    result.per_class_counts[cls] = 0;
    t = Clock::now();
    const auto blobs = extract_blobs(labels, cls, config.min_area);
    blob_ms += elapsed_ms(t);

    t = Clock::now();
    for (const auto& blob : blobs) {
      for (const auto& cell : detect_cells_in_blob(blob, bounds, config)) {
        CellRecord rec;
        rec.cell_id = static_cast<int>(result.cells.size());
        rec.class_label = cls;
        rec.ellipse = cell.ellipse;
        rec.area = cell.ellipse.area();
        rec.source_blob = blob_id;
        rec.low_confidence = cell.low_confidence;
        result.cells.push_back(rec);
        ++result.per_class_counts[cls];
      }
      ++blob_id;
    }
    cell_ms += elapsed_ms(t);
  }
  result.timing.push_back({"blobs", blob_ms});
  result.timing.push_back({"cells", cell_ms});
  result.total_milliseconds = elapsed_ms(start);
  return result;
}

// ---------------------------------------------------------------------------
// Reports

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string s = buf;
  if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string format_csv(const DetectionResult& result) {
  std::vector<const CellRecord*> rows;
  for (const auto& c : result.cells) rows.push_back(&c);
  std::stable_sort(rows.begin(), rows.end(),
                   [](const CellRecord* a, const CellRecord* b) { return a->cell_id < b->cell_id; });

  std::string out = "image_id,cell_id,class,cx,cy,major,minor,angle_deg,area\n";
  const std::string id = csv_field(result.image_id);
  for (const auto* c : rows) {
    out += id + ',' + std::to_string(c->cell_id) + ',' + std::to_string(c->class_label) + ',' +
           format_fixed(c->ellipse.center.x()) + ',' + format_fixed(c->ellipse.center.y()) + ',' +
           format_fixed(c->ellipse.semi_major) + ',' + format_fixed(c->ellipse.semi_minor) + ',' +
           format_fixed(c->ellipse.orientation_deg) + ',' + format_fixed(c->area) + '\n';
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

void write_csv(const DetectionResult& result, const std::filesystem::path& path) {
  write_text_file(path, format_csv(result));
}

std::vector<HistogramBin> area_histogram(const DetectionResult& result, int class_label,
                                         double bin_width) {
  if (!(bin_width > 0)) throw DomainError("histogram bin width must be positive");
  std::vector<HistogramBin> bins;
  for (const auto& c : result.cells) {
    if (c.class_label != class_label) continue;
    const auto bin = static_cast<std::size_t>(std::floor(std::max(c.area, 0.0) / bin_width));
    if (bin >= bins.size()) {
      const std::size_t old = bins.size();
      bins.resize(bin + 1);
      for (std::size_t i = old; i < bins.size(); ++i) bins[i].bin_start = static_cast<double>(i) * bin_width;
    }
    ++bins[bin].count;
  }
  return bins;
}

std::string format_histogram_csv(std::span<const HistogramBin> bins) {
  std::string out = "bin_start,count\n";
  for (const auto& b : bins) out += format_fixed(b.bin_start) + ',' + std::to_string(b.count) + '\n';
  return out;
}

}  // namespace cellipse

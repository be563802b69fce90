#include "cellipse/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <numbers>
#include <string>

#include "cellipse/errors.hpp"
#include "cellipse/pipeline.hpp"

namespace cellipse {

PixelImage::PixelImage(int width, int height)
    : PixelImage(width, height,
                 std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                           static_cast<std::size_t>(std::max(height, 0)) * 3)) {}

PixelImage::PixelImage(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 1 || height < 1) throw FormatError("image dimensions must be positive");
  if (data_.size() != static_cast<std::size_t>(width) * height * 3)
    throw FormatError("pixel buffer size does not match dimensions");
}

Eigen::MatrixX3d PixelImage::as_matrix() const {
  Eigen::MatrixX3d m(static_cast<Eigen::Index>(pixel_count()), 3);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (int c = 0; c < 3; ++c) m(i, c) = data_[static_cast<std::size_t>(i) * 3 + c];
  return m;
}

PixelImage PixelImage::from_matrix(int width, int height, const Eigen::MatrixX3d& values) {
  PixelImage out(width, height);
  if (static_cast<std::size_t>(values.rows()) != out.pixel_count())
    throw DomainError("from_matrix: row count does not match dimensions");
  auto data = out.data();
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (int c = 0; c < 3; ++c)
      data[static_cast<std::size_t>(i) * 3 + c] =
          static_cast<std::uint8_t>(std::clamp(std::round(values(i, c)), 0.0, 255.0));
  return out;
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

// ---------------------------------------------------------------------------
// Codecs

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("cannot read " + path.string());
  return bytes;
}

class PpmHeaderReader {
 public:
  explicit PpmHeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  long next_number() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_]))
      throw FormatError("malformed PPM header");
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > (1L << 24)) throw FormatError("PPM header value too large");
    }
    return v;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
      throw FormatError("malformed PPM header");
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 2;
};

bool is_png(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

PixelImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw FormatError(std::string("malformed PNG: ") + image.message);
  if (image.width == 0 || image.height == 0) {
    png_image_free(&image);
    throw FormatError("PNG has a zero dimension");
  }
  // Read as RGBA (8-bit output is not premultiplied) and drop alpha ourselves.
  image.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgba.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw FormatError("malformed PNG: " + msg);
  }
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  std::vector<std::uint8_t> rgb(n * 3);
  for (std::size_t i = 0; i < n; ++i) std::copy_n(&rgba[i * 4], 3, &rgb[i * 3]);
  return PixelImage(static_cast<int>(image.width), static_cast<int>(image.height), std::move(rgb));
}

}  // namespace

PixelImage decode_ppm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
    throw FormatError("not a binary PPM (P6)");
  PpmHeaderReader header(bytes);
  const long width = header.next_number();
  const long height = header.next_number();
  const long maxval = header.next_number();
  if (width < 1 || height < 1) throw FormatError("PPM has a zero dimension");
  if (maxval < 1 || maxval > 255) throw FormatError("only 8-bit PPM is supported");
  const std::size_t start = header.raster_start();
  const std::size_t size = static_cast<std::size_t>(width) * height * 3;
  if (bytes.size() < start + size) throw FormatError("truncated PPM raster");

  std::vector<std::uint8_t> data(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                                 bytes.begin() + static_cast<std::ptrdiff_t>(start + size));
  if (maxval != 255) {
    for (auto& v : data)
      v = static_cast<std::uint8_t>(std::min<long>(255, (v * 255L + maxval / 2) / maxval));
  }
  return PixelImage(static_cast<int>(width), static_cast<int>(height), std::move(data));
}

std::vector<std::uint8_t> encode_ppm(const PixelImage& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.data().begin(), img.data().end());
  return out;
}

PixelImage load_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (is_png(bytes)) return decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
  throw FormatError("unsupported image format: " + path.string());
}

void save_ppm(const PixelImage& img, const std::filesystem::path& path) {
  const auto bytes = encode_ppm(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

void save_png(const PixelImage& img, const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  const std::string name = path.string();
  if (!png_image_write_to_file(&image, name.c_str(), 0, img.data().data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot write " + name + ": " + msg);
  }
}

// ---------------------------------------------------------------------------
// Annotation

Rgb class_color(int class_label) {
  static constexpr std::array<Rgb, 8> kPalette{{
      {255, 255, 0},
      {0, 255, 255},
      {255, 0, 255},
      {255, 128, 0},
      {0, 255, 0},
      {255, 0, 0},
      {0, 128, 255},
      {255, 255, 255},
  }};
  const auto n = static_cast<int>(kPalette.size());
  return kPalette[static_cast<std::size_t>(((class_label % n) + n) % n)];
}

PixelImage draw_annotations(const PixelImage& img, const DetectionResult& result) {
  PixelImage out = img;
  const double w = img.width(), h = img.height();
  for (const auto& cell : result.cells) {
    const auto& e = cell.ellipse;
    if (e.center.x() < -0.5 * w || e.center.x() > 1.5 * w || e.center.y() < -0.5 * h ||
        e.center.y() > 1.5 * h)
      throw DomainError("ellipse centre far outside the image");
    const Rgb color = class_color(cell.class_label);
    // Sample densely enough that consecutive samples are well under a pixel apart.
    const int samples =
        std::max(16, static_cast<int>(std::ceil(4.0 * std::numbers::pi * e.semi_major)));
    for (int s = 0; s < samples; ++s) {
      const auto p = e.point_at(2.0 * std::numbers::pi * s / samples);
      const int x = static_cast<int>(std::lround(p.x()));
      const int y = static_cast<int>(std::lround(p.y()));
      if (out.contains(x, y)) out.set(x, y, color);
    }
  }
  return out;
}

void render_annotated(const PixelImage& img, const DetectionResult& result,
                      const std::filesystem::path& path) {
  save_png(draw_annotations(img, result), path);
}

}  // namespace cellipse

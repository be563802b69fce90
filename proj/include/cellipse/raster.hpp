#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace cellipse {

struct DetectionResult;

using Rgb = std::array<std::uint8_t, 3>;

/// Interleaved 3-channel 8-bit raster, row-major.
class PixelImage {
 public:
  PixelImage() = default;
  /// Zero-filled image. Throws FormatError on a zero dimension.
  PixelImage(int width, int height);
  /// Takes ownership of `data`, which must hold width*height*3 bytes.
  PixelImage(int width, int height, std::vector<std::uint8_t> data);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const { return data_.empty(); }

  std::span<const std::uint8_t> data() const { return data_; }
  std::span<std::uint8_t> data() { return data_; }

  Rgb at(int x, int y) const {
    const auto* p = &data_[offset(x, y)];
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, const Rgb& c) {
    auto* p = &data_[offset(x, y)];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  /// One row per pixel, columns are the three channels.
  Eigen::MatrixX3d as_matrix() const;
  /// Rounds and clamps `values` to [0,255]; `values` must have width*height rows.
  static PixelImage from_matrix(int width, int height, const Eigen::MatrixX3d& values);

  friend bool operator==(const PixelImage&, const PixelImage&) = default;

 private:
  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// One boolean per pixel; true is foreground.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool value = false)
      : width_(width), height_(height), bits_(static_cast<std::size_t>(width) * height, value) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool v) { bits_[index(x, y)] = v; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  std::size_t count() const;

  std::span<const std::uint8_t> bits() const { return bits_; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Decodes a PNG or binary PPM (P6). Grayscale is replicated to three
/// channels and alpha is stripped.
PixelImage load_image(const std::filesystem::path& path);
PixelImage decode_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_ppm(const PixelImage& img);

void save_png(const PixelImage& img, const std::filesystem::path& path);
void save_ppm(const PixelImage& img, const std::filesystem::path& path);

/// Stroke colour for a class index; an 8-colour cycle.
Rgb class_color(int class_label);

/// Returns a copy of `img` with every detected ellipse outlined (1 px).
PixelImage draw_annotations(const PixelImage& img, const DetectionResult& result);

/// draw_annotations followed by save_png.
void render_annotated(const PixelImage& img, const DetectionResult& result,
                      const std::filesystem::path& path);

}  // namespace cellipse

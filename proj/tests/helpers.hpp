#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "cellipse/raster.hpp"
#include "cellipse/segmentation.hpp"

namespace testing_helpers {

inline cellipse::BinaryMask mask_from(int w, int h, const std::function<bool(int, int)>& inside) {
  cellipse::BinaryMask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.set(x, y, inside(x, y));
  return m;
}

inline cellipse::BinaryMask disk_mask(int w, int h, double cx, double cy, double r) {
  return mask_from(w, h, [&](int x, int y) { return std::hypot(x - cx, y - cy) <= r; });
}

inline cellipse::BinaryMask two_circles(int w, int h, double r, double sep) {
  const double cy = h / 2.0, c1 = w / 2.0 - sep / 2, c2 = w / 2.0 + sep / 2;
  return mask_from(w, h, [&](int x, int y) {
    return std::hypot(x - c1, y - cy) <= r || std::hypot(x - c2, y - cy) <= r;
  });
}

/// The single blob of a mask; callers make sure there is exactly one.
inline cellipse::Blob only_blob(const cellipse::BinaryMask& m) {
  return cellipse::connected_components(m, 1, 1).at(0);
}

inline cellipse::PixelImage paint(const cellipse::BinaryMask& m, cellipse::Rgb fg, cellipse::Rgb bg) {
  cellipse::PixelImage img(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) img.set(x, y, m.at(x, y) ? fg : bg);
  return img;
}

}  // namespace testing_helpers

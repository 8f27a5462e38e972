#pragma once

#include <algorithm>
#include <cmath>

namespace dbcf {

/// Integer grid location, (row, col).
struct Index2 {
  int row = 0;
  int col = 0;

  friend bool operator==(const Index2&, const Index2&) = default;
};

/// Continuous image location in pixel-index coordinates, (row, col).
struct Point2 {
  double row = 0.0;
  double col = 0.0;
};

inline double distance(const Point2& a, const Point2& b) {
  return std::hypot(a.row - b.row, a.col - b.col);
}

/// Axis-aligned box: top-left corner plus size, all in pixels.
struct BBox {
  double row = 0.0;
  double col = 0.0;
  double height = 0.0;
  double width = 0.0;

  Point2 center() const { return {row + height / 2.0, col + width / 2.0}; }

  static BBox centered(const Point2& c, double height, double width) {
    return {c.row - height / 2.0, c.col - width / 2.0, height, width};
  }
};

/// Intersection-over-union of two boxes, in [0, 1].
inline double iou(const BBox& a, const BBox& b) {
  const double r0 = std::max(a.row, b.row);
  const double c0 = std::max(a.col, b.col);
  const double r1 = std::min(a.row + a.height, b.row + b.height);
  const double c1 = std::min(a.col + a.width, b.col + b.width);
  const double inter = std::max(0.0, r1 - r0) * std::max(0.0, c1 - c0);
  const double uni = a.height * a.width + b.height * b.width - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace dbcf

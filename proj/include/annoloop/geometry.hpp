#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "annoloop/errors.hpp"

namespace annoloop {

/// Axis-aligned box in continuous, 0-based pixel coordinates using the
/// corner convention [xmin, ymin, xmax, ymax]. Always has positive area.
class BoundingBox {
 public:
  /// Throws DegenerateBox unless all coordinates are finite and
  /// xmin < xmax, ymin < ymax.
  BoundingBox(double xmin, double ymin, double xmax, double ymax)
      : xmin_(xmin), ymin_(ymin), xmax_(xmax), ymax_(ymax) {
    if (!std::isfinite(xmin) || !std::isfinite(ymin) || !std::isfinite(xmax) || !std::isfinite(ymax)) {
      throw DegenerateBox("bounding box has non-finite coordinates");
    }
    if (!(xmin < xmax) || !(ymin < ymax)) {
      throw DegenerateBox("bounding box has zero area: (" + std::to_string(xmin) + ", " + std::to_string(ymin) +
                          ", " + std::to_string(xmax) + ", " + std::to_string(ymax) + ")");
    }
  }

  /// From the [x, y, width, height] convention.
  static BoundingBox from_xywh(double x, double y, double w, double h) { return {x, y, x + w, y + h}; }

  double xmin() const noexcept { return xmin_; }
  double ymin() const noexcept { return ymin_; }
  double xmax() const noexcept { return xmax_; }
  double ymax() const noexcept { return ymax_; }
  double width() const noexcept { return xmax_ - xmin_; }
  double height() const noexcept { return ymax_ - ymin_; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;

 private:
  double xmin_, ymin_, xmax_, ymax_;
};

inline double area(const BoundingBox& b) noexcept { return b.width() * b.height(); }

inline double intersection_area(const BoundingBox& a, const BoundingBox& b) noexcept {
  const double w = std::min(a.xmax(), b.xmax()) - std::max(a.xmin(), b.xmin());
  const double h = std::min(a.ymax(), b.ymax()) - std::max(a.ymin(), b.ymin());
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

/// Intersection over union, in [0, 1]; exactly 0 for disjoint or touching boxes.
inline double iou(const BoundingBox& a, const BoundingBox& b) noexcept {
  const double inter = intersection_area(a, b);
  if (inter == 0.0) return 0.0;
  const double uni = area(a) + area(b) - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// Clips the box into [0,width]x[0,height]. Throws DegenerateBox when
/// nothing of the box is left inside the image.
inline BoundingBox clamp_to_image(const BoundingBox& b, double width, double height) {
  if (!(width > 0.0) || !(height > 0.0)) {
    throw DegenerateBox("image dimensions must be positive");
  }
  const double x0 = std::clamp(b.xmin(), 0.0, width);
  const double y0 = std::clamp(b.ymin(), 0.0, height);
  const double x1 = std::clamp(b.xmax(), 0.0, width);
  const double y1 = std::clamp(b.ymax(), 0.0, height);
  return BoundingBox(x0, y0, x1, y1);
}

}  // namespace annoloop

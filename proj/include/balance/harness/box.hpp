#pragma once

#include <algorithm>

#include "balance/error.hpp"

namespace balance {

/// Axis-aligned box given by centre and extent.
struct Box {
  double cx = 0.0;
  double cy = 0.0;
  double w = 1.0;
  double h = 1.0;

  void validate() const {
    if (!(w > 0.0) || !(h > 0.0)) throw InvalidArgument("box extents must be positive");
  }

  double area() const { return w * h; }
};

/// Intersection over union. Symmetric in its arguments bit for bit.
inline double iou(const Box& a, const Box& b) {
  const double ix = std::min(a.cx + a.w / 2, b.cx + b.w / 2) - std::max(a.cx - a.w / 2, b.cx - b.w / 2);
  const double iy = std::min(a.cy + a.h / 2, b.cy + b.h / 2) - std::max(a.cy - a.h / 2, b.cy - b.h / 2);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

}  // namespace balance

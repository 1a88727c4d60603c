#pragma once

#include <algorithm>
#include <cmath>

#include "manet/tensor.hpp"

namespace manet {

// Axis-aligned box, top-left corner plus extents, pixel units.
struct BBox {
  float x = 0, y = 0, w = 0, h = 0;

  float cx() const { return x + w / 2; }
  float cy() const { return y + h / 2; }
  float area() const { return w * h; }
  bool valid() const { return w > 0 && h > 0; }
};

inline double iou(const BBox& a, const BBox& b) {
  check(a.valid() && b.valid(), "iou: boxes must have positive extents");
  const double x0 = std::max(a.x, b.x);
  const double y0 = std::max(a.y, b.y);
  const double x1 = std::min(a.x + a.w, b.x + b.w);
  const double y1 = std::min(a.y + a.h, b.y + b.h);
  const double iw = std::max(0.0, x1 - x0);
  const double ih = std::max(0.0, y1 - y0);
  const double inter = iw * ih;
  const double uni = double(a.w) * a.h + double(b.w) * b.h - inter;
  return inter / uni;
}

inline double center_distance(const BBox& a, const BBox& b) {
  const double dx = a.cx() - b.cx();
  const double dy = a.cy() - b.cy();
  return std::sqrt(dx * dx + dy * dy);
}

// Clamp a box into a frame, keeping extents at least min_extent (shrinking
// only when the frame itself is smaller).
inline BBox clamp_to_frame(BBox b, int frame_w, int frame_h, float min_extent = 4.0f) {
  b.w = std::max(min_extent, std::min(b.w, float(frame_w)));
  b.h = std::max(min_extent, std::min(b.h, float(frame_h)));
  b.x = std::max(0.0f, std::min(b.x, float(frame_w) - b.w));
  b.y = std::max(0.0f, std::min(b.y, float(frame_h) - b.h));
  return b;
}

}  // namespace manet

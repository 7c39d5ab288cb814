#pragma once

#include <algorithm>
#include <cmath>

namespace siamsa {

/// Axis-aligned box, top-left corner plus extent, in pixels.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  static BBox from_center(double cx, double cy, double w, double h) {
    return {cx - w / 2.0, cy - h / 2.0, w, h};
  }

  double cx() const { return x + w / 2.0; }
  double cy() const { return y + h / 2.0; }
  double area() const { return w * h; }
  bool valid() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) &&
           w >= 0.0 && h >= 0.0;
  }
  bool positive() const { return valid() && w > 0.0 && h > 0.0; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Shrinks/moves `b` so it lies inside a frame of the given size with at
/// least `min_side` pixels per side (capped by the frame).
inline BBox clamp_to_frame(const BBox& b, double frame_w, double frame_h, double min_side = 1.0) {
  const double w = std::clamp(b.w, std::min(min_side, frame_w), frame_w);
  const double h = std::clamp(b.h, std::min(min_side, frame_h), frame_h);
  const double cx = std::clamp(b.cx(), 0.0, frame_w);
  const double cy = std::clamp(b.cy(), 0.0, frame_h);
  return {std::clamp(cx - w / 2.0, 0.0, frame_w - w), std::clamp(cy - h / 2.0, 0.0, frame_h - h), w,
          h};
}

}  // namespace siamsa

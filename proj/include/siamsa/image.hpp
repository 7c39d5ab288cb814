#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include "siamsa/bbox.hpp"
#include "siamsa/tensor.hpp"

namespace siamsa {

/// Frames are 3×H×W tensors of 0..255 intensities (RGB order).
using Image = Tensor;
using Color = std::array<double, 3>;

inline Image make_image(std::size_t width, std::size_t height, const Color& fill = {0, 0, 0}) {
  Image img = Tensor::chw(3, height, width);
  for (std::size_t c = 0; c < 3; ++c)
    std::fill_n(img.data().data() + c * width * height, width * height, fill[c]);
  return img;
}

inline std::size_t image_width(const Image& img) { return img.dim(2); }
inline std::size_t image_height(const Image& img) { return img.dim(1); }

inline Color channel_mean(const Image& img) {
  img.require_layout({Axis::Channel, Axis::Height, Axis::Width}, "channel_mean");
  const std::size_t n = img.dim(1) * img.dim(2);
  if (n == 0) throw InvalidInput("channel_mean: empty image");
  Color m{};
  for (std::size_t c = 0; c < 3; ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += img[c * n + i];
    m[c] = acc / static_cast<double>(n);
  }
  return m;
}

/// Side of the square context region around `box` at template resolution.
inline double context_side(const BBox& box, double context) {
  return std::max(box.w, box.h) + context * (box.w + box.h) / 2.0;
}

/// Bilinear resample of the square region of side `side` centered at (cx, cy)
/// onto an out_size×out_size grid. Pixel centers sit at integer coordinates;
/// samples reaching outside the frame take `pad`.
inline Tensor crop_square(const Image& frame, double cx, double cy, double side,
                          std::size_t out_size, const Color& pad) {
  frame.require_layout({Axis::Channel, Axis::Height, Axis::Width}, "crop_patch");
  if (frame.dim(0) != 3 || frame.dim(1) == 0 || frame.dim(2) == 0)
    throw InvalidInput("crop_patch: frame must be a nonempty 3-channel image");
  if (!(side > 0.0) || !std::isfinite(side) || !std::isfinite(cx) || !std::isfinite(cy))
    throw InvalidInput("crop_patch: degenerate crop region");
  if (out_size == 0) throw InvalidInput("crop_patch: zero output size");
  const auto H = static_cast<std::ptrdiff_t>(frame.dim(1));
  const auto W = static_cast<std::ptrdiff_t>(frame.dim(2));
  const double step = side / static_cast<double>(out_size);
  const double x_origin = cx - side / 2.0, y_origin = cy - side / 2.0;
  Tensor out = Tensor::chw(3, out_size, out_size);
  for (std::size_t v = 0; v < out_size; ++v) {
    const double sy = y_origin + (static_cast<double>(v) + 0.5) * step - 0.5;
    const double fy0 = std::floor(sy);
    const double ty = sy - fy0;
    const auto y0 = static_cast<std::ptrdiff_t>(fy0);
    for (std::size_t u = 0; u < out_size; ++u) {
      const double sx = x_origin + (static_cast<double>(u) + 0.5) * step - 0.5;
      const double fx0 = std::floor(sx);
      const double tx = sx - fx0;
      const auto x0 = static_cast<std::ptrdiff_t>(fx0);
      for (std::size_t c = 0; c < 3; ++c) {
        auto px = [&](std::ptrdiff_t yy, std::ptrdiff_t xx) {
          if (yy < 0 || yy >= H || xx < 0 || xx >= W) return pad[c];
          return frame.at(c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
        };
        const double top = px(y0, x0) * (1.0 - tx) + px(y0, x0 + 1) * tx;
        const double bottom = px(y0 + 1, x0) * (1.0 - tx) + px(y0 + 1, x0 + 1) * tx;
        out.at(c, v, u) = top * (1.0 - ty) + bottom * ty;
      }
    }
  }
  return require_finite(std::move(out), "crop_patch");
}

/// Square crop centered on `box`. The context side is measured at template
/// resolution and grows proportionally for larger outputs, so the object
/// occupies the same number of patch pixels in template and search patches.
inline Tensor crop_patch(const Image& frame, const BBox& box, std::size_t out_size, double context,
                         const Color& pad, std::size_t template_size = 127) {
  if (!box.positive()) throw InvalidInput("crop_patch: box must have positive area");
  const double side = context_side(box, context) * static_cast<double>(out_size) /
                      static_cast<double>(template_size);
  return crop_square(frame, box.cx(), box.cy(), side, out_size, pad);
}

}  // namespace siamsa

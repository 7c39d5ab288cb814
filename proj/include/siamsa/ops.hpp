#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "siamsa/tensor.hpp"

namespace siamsa {

/// Dense 2-D convolution kernel, weights laid out [out][in][kh][kw].
/// Odd extents keep "same" padding symmetric; dilation spreads the taps.
struct ConvKernel {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t kh = 1;
  std::size_t kw = 1;
  std::size_t dilation = 1;
  std::vector<double> weights;
  std::vector<double> bias;

  ConvKernel() = default;
  ConvKernel(std::size_t out, std::size_t in, std::size_t kh_, std::size_t kw_,
             std::size_t dil = 1)
      : out_channels(out), in_channels(in), kh(kh_), kw(kw_), dilation(dil),
        weights(out * in * kh_ * kw_, 0.0), bias(out, 0.0) {
    validate();
  }

  void validate() const {
    if (kh % 2 == 0 || kw % 2 == 0)
      throw InvalidInput(detail::concat("conv kernel: extents must be odd, got ", kh, "x", kw));
    if (dilation < 1) throw InvalidInput("conv kernel: dilation must be >= 1");
    if (out_channels == 0 || in_channels == 0) throw InvalidInput("conv kernel: zero channels");
    if (weights.size() != out_channels * in_channels * kh * kw)
      throw InvalidInput("conv kernel: weight count does not match shape");
    if (bias.size() != out_channels) throw InvalidInput("conv kernel: bias count mismatch");
    for (double v : weights)
      if (!std::isfinite(v)) throw InvalidInput("conv kernel: non-finite weight");
    for (double v : bias)
      if (!std::isfinite(v)) throw InvalidInput("conv kernel: non-finite bias");
  }

  double& w(std::size_t o, std::size_t i, std::size_t y, std::size_t x) {
    return weights[((o * in_channels + i) * kh + y) * kw + x];
  }
  double w(std::size_t o, std::size_t i, std::size_t y, std::size_t x) const {
    return weights[((o * in_channels + i) * kh + y) * kw + x];
  }

  std::size_t extent_h() const { return dilation * (kh - 1) + 1; }
  std::size_t extent_w() const { return dilation * (kw - 1) + 1; }

  /// Same weights, taps spread by `d`.
  ConvKernel dilated(std::size_t d) const {
    ConvKernel k = *this;
    k.dilation = d;
    k.validate();
    return k;
  }
};

enum class Padding { Same, Valid };

/// Cross-correlation (no kernel flip). Same padding is zero padding.
inline Tensor conv2d(const Tensor& x, const ConvKernel& k, Padding padding) {
  x.require_layout({Axis::Channel, Axis::Height, Axis::Width}, "conv2d");
  k.validate();
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (cin != k.in_channels)
    throw InvalidInput(detail::concat("conv2d: channel axis is ", cin, " but kernel expects ",
                                      k.in_channels));
  const std::size_t eh = k.extent_h(), ew = k.extent_w();
  std::ptrdiff_t pad_y = 0, pad_x = 0;
  std::size_t oh = h, ow = w;
  if (padding == Padding::Valid) {
    if (h < eh || w < ew)
      throw InvalidInput(detail::concat("conv2d: valid padding needs height/width >= ", eh, "x",
                                        ew, ", got ", h, "x", w));
    oh = h - eh + 1;
    ow = w - ew + 1;
  } else {
    pad_y = static_cast<std::ptrdiff_t>(eh / 2);
    pad_x = static_cast<std::ptrdiff_t>(ew / 2);
  }
  if (oh == 0 || ow == 0) throw InvalidInput("conv2d: zero-sized output");

  Tensor out = Tensor::chw(k.out_channels, oh, ow);
  const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);
  const auto OH = static_cast<std::ptrdiff_t>(oh), OW = static_cast<std::ptrdiff_t>(ow);
  const auto d = static_cast<std::ptrdiff_t>(k.dilation);
  const double* src = x.data().data();
  double* dst = out.data().data();

  for (std::size_t o = 0; o < k.out_channels; ++o) {
    double* plane = dst + o * oh * ow;
    std::fill(plane, plane + oh * ow, k.bias[o]);
    for (std::size_t i = 0; i < cin; ++i) {
      const double* in_plane = src + i * h * w;
      for (std::size_t ky = 0; ky < k.kh; ++ky) {
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) * d - pad_y;
        const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy);
        const std::ptrdiff_t y1 = std::min<std::ptrdiff_t>(OH, H - dy);
        for (std::size_t kx = 0; kx < k.kw; ++kx) {
          const double wt = k.w(o, i, ky, kx);
          if (wt == 0.0) continue;
          const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) * d - pad_x;
          const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
          const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(OW, W - dx);
          for (std::ptrdiff_t oy = y0; oy < y1; ++oy) {
            double* row = plane + oy * OW;
            const double* in_row = in_plane + (oy + dy) * W + dx;
            for (std::ptrdiff_t ox = x0; ox < x1; ++ox) row[ox] += wt * in_row[ox];
          }
        }
      }
    }
  }
  return require_finite(std::move(out), "conv2d");
}

/// Per-channel valid sliding inner product of `search` with `templ`.
inline Tensor depthwise_xcorr(const Tensor& search, const Tensor& templ) {
  search.require_layout({Axis::Channel, Axis::Height, Axis::Width}, "depthwise_xcorr");
  templ.require_layout({Axis::Channel, Axis::Height, Axis::Width}, "depthwise_xcorr");
  const std::size_t c = search.dim(0), H = search.dim(1), W = search.dim(2);
  const std::size_t h = templ.dim(1), w = templ.dim(2);
  if (templ.dim(0) != c)
    throw InvalidInput(detail::concat("depthwise_xcorr: channel axis differs (search ", c,
                                      ", template ", templ.dim(0), ")"));
  if (h > H || w > W)
    throw InvalidInput(detail::concat("depthwise_xcorr: template ", h, "x", w,
                                      " larger than search ", H, "x", W));
  if (h == 0 || w == 0) throw InvalidInput("depthwise_xcorr: empty template");
  const std::size_t oh = H - h + 1, ow = W - w + 1;
  Tensor out = Tensor::chw(c, oh, ow);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* s = search.data().data() + ch * H * W;
    const double* t = templ.data().data() + ch * h * w;
    double* o = out.data().data() + ch * oh * ow;
    for (std::size_t ty = 0; ty < h; ++ty) {
      for (std::size_t tx = 0; tx < w; ++tx) {
        const double tv = t[ty * w + tx];
        if (tv == 0.0) continue;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const double* srow = s + (oy + ty) * W + tx;
          double* orow = o + oy * ow;
          for (std::size_t ox = 0; ox < ow; ++ox) orow[ox] += tv * srow[ox];
        }
      }
    }
  }
  return require_finite(std::move(out), "depthwise_xcorr");
}

enum class PoolMode { Avg, Max };

/// Pools C×S×H×W over the spatial axes into C×S.
inline Tensor global_pool(const Tensor& x, PoolMode mode) {
  x.require_layout({Axis::Channel, Axis::Scale, Axis::Height, Axis::Width}, "global_pool");
  const std::size_t c = x.dim(0), s = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (hw == 0) throw InvalidInput("global_pool: empty spatial extent");
  Tensor out({Axis::Channel, Axis::Scale}, {c, s});
  for (std::size_t i = 0; i < c * s; ++i) {
    const double* p = x.data().data() + i * hw;
    if (mode == PoolMode::Avg) {
      double acc = 0.0;
      for (std::size_t j = 0; j < hw; ++j) acc += p[j];
      out[i] = acc / static_cast<double>(hw);
    } else {
      out[i] = *std::max_element(p, p + hw);
    }
  }
  return require_finite(std::move(out), "global_pool");
}

/// Row-wise softmax with max subtraction.
inline Tensor softmax(const Tensor& m) {
  m.require_layout({Axis::Row, Axis::Col}, "softmax");
  require_finite_input(m, "softmax");
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  Tensor out = m;
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = out.data().data() + r * cols;
    if (cols == 0) continue;
    const double mx = *std::max_element(row, row + cols);
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (std::size_t j = 0; j < cols; ++j) row[j] /= sum;
  }
  return require_finite(std::move(out), "softmax");
}

inline void relu_inplace(Tensor& x) {
  for (double& v : x.data()) v = std::max(v, 0.0);
}

/// 2×2 window, stride 2, floor on odd extents. Downsampling step of the backbone.
inline Tensor max_pool2(const Tensor& x) {
  x.require_layout({Axis::Channel, Axis::Height, Axis::Width}, "max_pool2");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t oh = h / 2, ow = w / 2;
  if (oh == 0 || ow == 0) throw InvalidInput("max_pool2: input smaller than 2x2");
  Tensor out = Tensor::chw(c, oh, ow);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx)
        out.at(ch, y, xx) = std::max({x.at(ch, 2 * y, 2 * xx), x.at(ch, 2 * y, 2 * xx + 1),
                                      x.at(ch, 2 * y + 1, 2 * xx), x.at(ch, 2 * y + 1, 2 * xx + 1)});
  return out;
}

/// Center crop of the spatial axes (last two) to h×w.
inline Tensor center_crop(const Tensor& x, std::size_t h, std::size_t w) {
  const std::size_t r = x.rank();
  if (r < 2) throw InvalidInput("center_crop: rank < 2");
  const std::size_t H = x.dim(r - 2), W = x.dim(r - 1);
  if (h > H || w > W) throw InvalidInput("center_crop: target larger than input");
  if (h == H && w == W) return x;
  const std::size_t oy = (H - h) / 2, ox = (W - w) / 2;
  std::vector<std::size_t> shape = x.shape();
  shape[r - 2] = h;
  shape[r - 1] = w;
  Tensor out(x.axes(), shape);
  const std::size_t planes = x.size() / (H * W);
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx)
        out[(p * h + y) * w + xx] = x[(p * H + y + oy) * W + xx + ox];
  return out;
}

}  // namespace siamsa

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "siamsa/ops.hpp"
#include "siamsa/rng.hpp"
#include "siamsa/tensor.hpp"

namespace siamsa {

/// C×S×H×W feature volume. Scale index s is realized by the integer kernel
/// dilation `scale_dilations[s]`; index 0 is always the identity scale.
class ScaledTensor {
 public:
  ScaledTensor() = default;
  ScaledTensor(Tensor data, std::vector<std::size_t> dilations)
      : data_(std::move(data)), dilations_(std::move(dilations)) {
    data_.require_layout({Axis::Channel, Axis::Scale, Axis::Height, Axis::Width}, "ScaledTensor");
    validate_dilations(dilations_);
    if (data_.dim(1) != dilations_.size())
      throw InvalidInput(detail::concat("ScaledTensor: scale axis is ", data_.dim(1), " but ",
                                        dilations_.size(), " dilations were given"));
  }

  static void validate_dilations(const std::vector<std::size_t>& d) {
    if (d.empty()) throw InvalidInput("scale dilations: empty list");
    if (d.front() != 1) throw InvalidInput("scale dilations: first entry must be 1");
    for (std::size_t i = 1; i < d.size(); ++i)
      if (d[i] <= d[i - 1]) throw InvalidInput("scale dilations: must be strictly increasing");
  }

  const Tensor& tensor() const { return data_; }
  Tensor& tensor() { return data_; }
  const std::vector<std::size_t>& dilations() const { return dilations_; }

  std::size_t channels() const { return data_.dim(0); }
  std::size_t scales() const { return data_.dim(1); }
  std::size_t height() const { return data_.dim(2); }
  std::size_t width() const { return data_.dim(3); }

  /// Copy of scale slice s as C×H×W.
  Tensor slice(std::size_t s) const {
    const std::size_t c = channels(), hw = height() * width();
    Tensor out = Tensor::chw(c, height(), width());
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* src = data_.data().data() + (ch * scales() + s) * hw;
      std::copy(src, src + hw, out.data().data() + ch * hw);
    }
    return out;
  }

  void set_slice(std::size_t s, const Tensor& plane) {
    if (plane.dim(0) != channels() || plane.dim(1) != height() || plane.dim(2) != width())
      throw InvalidInput("ScaledTensor::set_slice: shape mismatch");
    const std::size_t hw = height() * width();
    for (std::size_t ch = 0; ch < channels(); ++ch) {
      const double* src = plane.data().data() + ch * hw;
      std::copy(src, src + hw, data_.data().data() + (ch * scales() + s) * hw);
    }
  }

  /// Assembles a stack from per-scale C×H×W slices.
  static ScaledTensor from_slices(const std::vector<Tensor>& slices,
                                  std::vector<std::size_t> dilations) {
    if (slices.empty()) throw InvalidInput("ScaledTensor::from_slices: no slices");
    const Tensor& f = slices.front();
    ScaledTensor out(Tensor::csw(f.dim(0), slices.size(), f.dim(1), f.dim(2)),
                     std::move(dilations));
    for (std::size_t s = 0; s < slices.size(); ++s) out.set_slice(s, slices[s]);
    return out;
  }

  /// Max over the scale axis, C×H×W.
  Tensor collapse_max() const {
    const std::size_t c = channels(), S = scales(), hw = height() * width();
    Tensor out = Tensor::chw(c, height(), width());
    for (std::size_t ch = 0; ch < c; ++ch) {
      double* dst = out.data().data() + ch * hw;
      const double* src = data_.data().data() + ch * S * hw;
      std::copy(src, src + hw, dst);
      for (std::size_t s = 1; s < S; ++s)
        for (std::size_t i = 0; i < hw; ++i) dst[i] = std::max(dst[i], src[s * hw + i]);
    }
    return out;
  }

  friend bool operator==(const ScaledTensor& a, const ScaledTensor& b) {
    return a.dilations_ == b.dilations_ && a.data_ == b.data_;
  }

 private:
  Tensor data_;
  std::vector<std::size_t> dilations_;
};

/// Normalized 3×3 binomial kernel, the smoothing used to open the scale axis.
inline ConvKernel binomial_smoothing_kernel() {
  ConvKernel k(1, 1, 3, 3);
  const double taps[3] = {1.0, 2.0, 1.0};
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 0; x < 3; ++x) k.w(0, 0, y, x) = taps[y] * taps[x] / 16.0;
  return k;
}

/// Edge-replicating pad of a C×H×W tensor by `p` on every side.
inline Tensor replicate_pad(const Tensor& x, std::size_t p) {
  x.require_layout({Axis::Channel, Axis::Height, Axis::Width}, "replicate_pad");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor out = Tensor::chw(c, h + 2 * p, w + 2 * p);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h + 2 * p; ++y) {
      const std::size_t sy = std::min(h - 1, y < p ? 0 : y - p);
      for (std::size_t xx = 0; xx < w + 2 * p; ++xx) {
        const std::size_t sx = std::min(w - 1, xx < p ? 0 : xx - p);
        out.at(ch, y, xx) = x.at(ch, sy, sx);
      }
    }
  return out;
}

/// Slice s is `f` smoothed by the binomial kernel dilated by scales[s], with
/// edge-replicated borders so constant maps stay constant. Slice 0 is `f` itself.
inline ScaledTensor lift_to_scale_stack(const Tensor& f, const std::vector<std::size_t>& scales) {
  f.require_layout({Axis::Channel, Axis::Height, Axis::Width}, "lift_to_scale_stack");
  ScaledTensor::validate_dilations(scales);
  const ConvKernel smooth = binomial_smoothing_kernel();
  const std::size_t c = f.dim(0), h = f.dim(1), w = f.dim(2);
  std::vector<Tensor> slices;
  slices.reserve(scales.size());
  slices.push_back(f);
  for (std::size_t s = 1; s < scales.size(); ++s) {
    const Tensor padded = replicate_pad(f, scales[s]);
    const ConvKernel k = smooth.dilated(scales[s]);
    Tensor slice = Tensor::chw(c, h, w);
    for (std::size_t ch = 0; ch < c; ++ch) {
      Tensor plane = Tensor::chw(1, padded.dim(1), padded.dim(2));
      const std::size_t n = padded.dim(1) * padded.dim(2);
      std::copy_n(padded.data().data() + ch * n, n, plane.data().data());
      const Tensor smoothed = conv2d(plane, k, Padding::Valid);
      std::copy_n(smoothed.data().data(), h * w, slice.data().data() + ch * h * w);
    }
    slices.push_back(std::move(slice));
  }
  return ScaledTensor::from_slices(slices, scales);
}

/// One kernel per relative scale offset, offsets -r..r for a window of 2r+1.
/// The bias of the center kernel is applied once per output slice.
struct SeKernelBank {
  std::vector<ConvKernel> offsets;

  std::size_t window() const { return offsets.size(); }
  const ConvKernel& center() const { return offsets[offsets.size() / 2]; }
};

/// Scale-equivariant convolution. Output slice s sums, over the input slices
/// s' in the window around s (truncated at the stack ends), the convolution of
/// slice s' with the offset kernel dilated by scale_dilations[s].
inline ScaledTensor se_conv(const ScaledTensor& x, const SeKernelBank& bank) {
  const std::size_t win = bank.window();
  if (win == 0 || win % 2 == 0)
    throw InvalidInput(detail::concat("se_conv: inter-scale window must be odd, got ", win));
  if (win > x.scales())
    throw InvalidInput(detail::concat("se_conv: inter-scale window ", win,
                                      " exceeds scale count ", x.scales()));
  for (const ConvKernel& k : bank.offsets) {
    if (k.in_channels != x.channels())
      throw InvalidInput(detail::concat("se_conv: kernel expects ", k.in_channels,
                                        " channels, stack has ", x.channels()));
    if (k.out_channels != bank.center().out_channels || k.kh != bank.center().kh ||
        k.kw != bank.center().kw)
      throw InvalidInput("se_conv: offset kernels disagree in shape");
  }
  const auto radius = static_cast<std::ptrdiff_t>(win / 2);
  const auto S = static_cast<std::ptrdiff_t>(x.scales());
  std::vector<Tensor> slices;
  slices.reserve(x.scales());
  for (std::ptrdiff_t s = 0; s < S; ++s) {
    const std::size_t dil = x.dilations()[static_cast<std::size_t>(s)];
    Tensor acc = conv2d(x.slice(static_cast<std::size_t>(s)), bank.center().dilated(dil),
                        Padding::Same);
    for (std::ptrdiff_t o = -radius; o <= radius; ++o) {
      const std::ptrdiff_t src = s + o;
      if (o == 0 || src < 0 || src >= S) continue;
      ConvKernel k = bank.offsets[static_cast<std::size_t>(o + radius)].dilated(dil);
      std::fill(k.bias.begin(), k.bias.end(), 0.0);
      const Tensor part = conv2d(x.slice(static_cast<std::size_t>(src)), k, Padding::Same);
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += part[i];
    }
    slices.push_back(std::move(acc));
  }
  ScaledTensor out = ScaledTensor::from_slices(slices, x.dilations());
  if (!out.tensor().all_finite()) throw InvariantViolation("se_conv: produced a non-finite value");
  return out;
}

/// Depthwise correlation carried out independently on every scale slice.
inline ScaledTensor se_dw_xcorr(const ScaledTensor& search, const ScaledTensor& templ) {
  if (search.scales() != templ.scales())
    throw InvalidInput(detail::concat("se_dw_xcorr: scale axis differs (search ",
                                      search.scales(), ", template ", templ.scales(), ")"));
  if (search.channels() != templ.channels())
    throw InvalidInput(detail::concat("se_dw_xcorr: channel axis differs (search ",
                                      search.channels(), ", template ", templ.channels(), ")"));
  std::vector<Tensor> slices;
  slices.reserve(search.scales());
  for (std::size_t s = 0; s < search.scales(); ++s)
    slices.push_back(depthwise_xcorr(search.slice(s), templ.slice(s)));
  return ScaledTensor::from_slices(slices, search.dilations());
}

// ---------------------------------------------------------------------------
// Backbone

struct BackboneLayer {
  std::size_t out_channels;
  std::size_t kernel;  // odd, valid padding
  bool pool;           // 2×2 max-pool, stride 2, after the activation
};

/// Five-layer convolutional stand-in for a lightweight AlexNet-style
/// extractor; layers 4 and 5 are tapped.
struct BackboneConfig {
  std::vector<BackboneLayer> layers{
      {8, 3, true}, {16, 3, true}, {16, 3, true}, {16, 3, false}, {16, 3, false}};
  std::size_t template_size = 127;
  std::size_t search_size = 287;
  std::vector<std::size_t> scale_dilations{1, 2, 3};
  std::size_t inter_scale = 1;

  std::size_t feature_channels() const { return layers.back().out_channels; }
  std::size_t tap4_channels() const { return layers[3].out_channels; }

  std::size_t total_stride() const {
    std::size_t s = 1;
    for (const auto& l : layers) s *= l.pool ? 2 : 1;
    return s;
  }

  /// Spatial extent after layer `upto` (1-based) for a square input.
  std::size_t extent_after(std::size_t input, std::size_t upto) const {
    std::size_t e = input;
    for (std::size_t i = 0; i < upto; ++i) {
      if (e < layers[i].kernel)
        throw InvalidInput(detail::concat("backbone: input ", input, " collapses at layer ", i + 1));
      e = e - layers[i].kernel + 1;
      if (layers[i].pool) e /= 2;
      if (e == 0) throw InvalidInput("backbone: zero-sized feature map");
    }
    return e;
  }

  void validate() const {
    if (layers.size() != 5)
      throw InvalidInput(detail::concat("backbone: expected 5 layers, got ", layers.size()));
    for (const auto& l : layers)
      if (l.kernel % 2 == 0 || l.out_channels == 0)
        throw InvalidInput("backbone: kernels must be odd with nonzero channels");
    if (layers[3].out_channels != layers[4].out_channels)
      throw InvalidInput("backbone: tap layers 4 and 5 must have equal channel counts");
    ScaledTensor::validate_dilations(scale_dilations);
    if (inter_scale % 2 == 0 || inter_scale > scale_dilations.size())
      throw InvalidInput("backbone: inter_scale must be odd and <= scale count");
    if (search_size < template_size) throw InvalidInput("backbone: search smaller than template");
    const std::size_t stride = total_stride();
    for (std::size_t tap : {4u, 5u}) {
      const std::size_t zt = extent_after(template_size, tap);
      const std::size_t xs = extent_after(search_size, tap);
      if (xs < zt) throw InvalidInput("backbone: search features smaller than template features");
      if ((xs - zt) * stride != search_size - template_size)
        throw InvalidInput(detail::concat("backbone: stride arithmetic inconsistent at layer ", tap,
                                          " (", xs, " - ", zt, ") * ", stride, " != ",
                                          search_size - template_size));
    }
  }

  /// Side of the correlation map produced by the φ5 template/search pair.
  std::size_t response_extent() const {
    return extent_after(search_size, 5) - extent_after(template_size, 5) + 1;
  }
};

/// He-uniform initialization with zero bias.
inline void he_uniform(ConvKernel& k, Rng& rng, double gain = 1.0) {
  const double fan_in = static_cast<double>(k.in_channels * k.kh * k.kw);
  const double bound = gain * std::sqrt(6.0 / fan_in);
  for (double& v : k.weights) v = rng.uniform(-bound, bound);
}

struct BackboneWeights {
  std::vector<ConvKernel> layers;

  static BackboneWeights random(const BackboneConfig& cfg, Rng& rng) {
    BackboneWeights w;
    std::size_t in = 3;
    for (const auto& l : cfg.layers) {
      ConvKernel k(l.out_channels, in, l.kernel, l.kernel);
      he_uniform(k, rng);
      w.layers.push_back(std::move(k));
      in = l.out_channels;
    }
    return w;
  }
};

struct BackboneFeatures {
  Tensor phi4;
  Tensor phi5;
};

/// Runs a 3×P×P patch (raw 0..255 intensities) through the five layers.
inline BackboneFeatures backbone_forward(const Tensor& patch, const BackboneConfig& cfg,
                                         const BackboneWeights& weights) {
  patch.require_layout({Axis::Channel, Axis::Height, Axis::Width}, "backbone_forward");
  if (patch.dim(0) != 3) throw InvalidInput("backbone_forward: patch must have 3 channels");
  const std::size_t p = patch.dim(1);
  if (patch.dim(2) != p || (p != cfg.template_size && p != cfg.search_size))
    throw InvalidInput(detail::concat("backbone_forward: patch ", patch.dim(1), "x", patch.dim(2),
                                      " matches neither template ", cfg.template_size,
                                      " nor search ", cfg.search_size));
  if (weights.layers.size() != cfg.layers.size())
    throw InvalidInput("backbone_forward: weight bank does not match config");

  Tensor x = patch;
  for (double& v : x.data()) v /= 255.0;
  BackboneFeatures out;
  for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
    x = conv2d(x, weights.layers[i], Padding::Valid);
    if (i + 1 < cfg.layers.size()) relu_inplace(x);
    if (cfg.layers[i].pool) x = max_pool2(x);
    if (i == 3) out.phi4 = x;
  }
  out.phi5 = std::move(x);
  return out;
}

/// Lifts φ5 onto the scale stack and applies one scale-equivariant layer.
inline ScaledTensor scale_equivariant_features(const Tensor& phi5, const BackboneConfig& cfg,
                                               const SeKernelBank& bank) {
  return se_conv(lift_to_scale_stack(phi5, cfg.scale_dilations), bank);
}

inline SeKernelBank random_se_bank(std::size_t channels, std::size_t window, Rng& rng) {
  SeKernelBank bank;
  for (std::size_t o = 0; o < window; ++o) {
    ConvKernel k(channels, channels, 3, 3);
    he_uniform(k, rng, 1.0 / std::sqrt(static_cast<double>(window)));
    bank.offsets.push_back(std::move(k));
  }
  return bank;
}

}  // namespace siamsa

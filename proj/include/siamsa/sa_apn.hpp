#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "siamsa/bbox.hpp"
#include "siamsa/instrumentation.hpp"
#include "siamsa/ops.hpp"
#include "siamsa/psa.hpp"
#include "siamsa/rng.hpp"
#include "siamsa/se_backbone.hpp"

namespace siamsa {

/// Template or search features as consumed by the proposal network: the raw
/// layer-4 map and the scale-lifted layer-5 map.
struct SiameseFeatures {
  Tensor phi4;
  ScaledTensor phi5;
};

/// F = R_d + λ1·A + λ2·C. `projection` maps the 2C concatenation [R_s; R_d]
/// back to C channels (1×1, applied per scale slice).
struct FusionWeights {
  double lambda1 = 0.5;
  double lambda2 = 0.5;
  ProjectionSet attention;
  ConvKernel projection;

  /// Projection that averages the two halves of the concatenation.
  static FusionWeights averaging(std::size_t channels, double l1, double l2) {
    FusionWeights w;
    w.lambda1 = l1;
    w.lambda2 = l2;
    w.projection = ConvKernel(channels, 2 * channels, 1, 1);
    for (std::size_t c = 0; c < channels; ++c) {
      w.projection.w(c, c, 0, 0) = 0.5;
      w.projection.w(c, channels + c, 0, 0) = 0.5;
    }
    return w;
  }
};

/// Two 3×3 layers: C → hidden (ReLU) → 4 offsets (dx, dy, dw, dh).
struct AgnWeights {
  ConvKernel hidden;
  ConvKernel output;
};

struct SaApnWeights {
  FusionWeights fusion;
  AgnWeights agn;
};

/// Where grid cells sit inside the search patch and how big the base box is.
struct AnchorGeometry {
  double base_size = 64.0;  // side of the square base anchor, search-patch pixels
  double stride = 8.0;      // search-patch pixels per feature cell
  double search_size = 287.0;
};

inline constexpr double kMaxLogScale = 16.0;

/// Center of cell `i` out of `n` along one axis, in search-patch pixels.
/// The grid is centered on the patch center.
inline double grid_center(std::size_t i, std::size_t n, const AnchorGeometry& g) {
  return g.search_size / 2.0 +
         (static_cast<double>(i) - (static_cast<double>(n) - 1.0) / 2.0) * g.stride;
}

/// Shift by (dx, dy)·stride and scale by (e^dw, e^dh). Centers are kept in the
/// patch and log-scales in ±kMaxLogScale so every box stays finite and positive.
inline BBox decode_offsets(double cx, double cy, double w, double h, double dx, double dy,
                           double dw, double dh, const AnchorGeometry& g) {
  const double ncx = std::clamp(cx + dx * g.stride, 0.0, g.search_size);
  const double ncy = std::clamp(cy + dy * g.stride, 0.0, g.search_size);
  const double nw = w * std::exp(std::clamp(dw, -kMaxLogScale, kMaxLogScale));
  const double nh = h * std::exp(std::clamp(dh, -kMaxLogScale, kMaxLogScale));
  return BBox::from_center(ncx, ncy, std::max(nw, 1e-6), std::max(nh, 1e-6));
}

struct AnchorField {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<BBox> anchors;  // row-major
  ScaledTensor features;

  const BBox& at(std::size_t r, std::size_t c) const { return anchors[r * cols + c]; }
};

/// Decodes a 4×H×W offset map against base boxes centered on each grid cell.
inline std::vector<BBox> decode_anchor_grid(const Tensor& offsets, const AnchorGeometry& g) {
  offsets.require_layout({Axis::Channel, Axis::Height, Axis::Width}, "decode_anchor_grid");
  if (offsets.dim(0) != 4) throw InvalidInput("decode_anchor_grid: expected 4 offset channels");
  const std::size_t rows = offsets.dim(1), cols = offsets.dim(2);
  std::vector<BBox> out;
  out.reserve(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      out.push_back(decode_offsets(grid_center(c, cols, g), grid_center(r, rows, g), g.base_size,
                                   g.base_size, offsets.at(0, r, c), offsets.at(1, r, c),
                                   offsets.at(2, r, c), offsets.at(3, r, c), g));
  return out;
}

/// Zero-offset anchors: the base box at every cell.
inline AnchorField base_anchor_field(const ScaledTensor& features, const AnchorGeometry& g) {
  AnchorField f;
  f.rows = features.height();
  f.cols = features.width();
  f.anchors = decode_anchor_grid(Tensor::chw(4, f.rows, f.cols), g);
  f.features = features;
  return f;
}

/// Crops both maps to their common spatial extent, centered.
inline std::pair<ScaledTensor, ScaledTensor> equalize_extent(const ScaledTensor& a,
                                                             const ScaledTensor& b) {
  const std::size_t h = std::min(a.height(), b.height()), w = std::min(a.width(), b.width());
  return {ScaledTensor(center_crop(a.tensor(), h, w), a.dilations()),
          ScaledTensor(center_crop(b.tensor(), h, w), b.dilations())};
}

/// Concatenates [r_s; r_d] along channels and projects back to C, per scale.
inline ScaledTensor concat_project(const ScaledTensor& r_s, const ScaledTensor& r_d,
                                   const ConvKernel& projection) {
  const std::size_t c = r_d.channels(), hw = r_d.height() * r_d.width();
  if (projection.in_channels != 2 * c || projection.out_channels != c || projection.kh != 1 ||
      projection.kw != 1)
    throw InvalidInput(detail::concat("fusion projection must be 1x1 from ", 2 * c, " to ", c,
                                      " channels"));
  std::vector<Tensor> slices;
  for (std::size_t s = 0; s < r_d.scales(); ++s) {
    Tensor cat = Tensor::chw(2 * c, r_d.height(), r_d.width());
    const Tensor a = r_s.slice(s), b = r_d.slice(s);
    std::copy(a.storage().begin(), a.storage().end(), cat.storage().begin());
    std::copy(b.storage().begin(), b.storage().end(),
              cat.storage().begin() + static_cast<std::ptrdiff_t>(c * hw));
    slices.push_back(conv2d(cat, projection, Padding::Same));
  }
  return ScaledTensor::from_slices(slices, r_d.dilations());
}

/// Shallow/deep fusion. Attention takes queries and keys from the shallow
/// map and values from the deep map. Output has R_d's shape after equalization.
inline ScaledTensor fuse_apn_features(const ScaledTensor& r_d_in, const ScaledTensor& r_s_in,
                                      const FusionWeights& w) {
  ++call_counts.fuse_apn;
  if (r_d_in.channels() != r_s_in.channels() || r_d_in.scales() != r_s_in.scales())
    throw InvalidInput(detail::concat("fuse_apn_features: channel/scale axes differ (",
                                      r_d_in.channels(), "x", r_d_in.scales(), " vs ",
                                      r_s_in.channels(), "x", r_s_in.scales(), ")"));
  const auto [r_d, r_s] = equalize_extent(r_d_in, r_s_in);
  Tensor out = r_d.tensor();
  if (w.lambda1 != 0.0) {
    const ScaledTensor a = cross_attention_map(r_s, r_d, w.attention);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w.lambda1 * a.tensor()[i];
  }
  if (w.lambda2 != 0.0) {
    const ScaledTensor c = concat_project(r_s, r_d, w.projection);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w.lambda2 * c.tensor()[i];
  }
  return ScaledTensor(require_finite(std::move(out), "fuse_apn_features"), r_d.dilations());
}

/// Raw AGN output, 4×H×W offsets, from the scale-collapsed features.
inline Tensor agn_offsets(const ScaledTensor& f_apn, const AgnWeights& w) {
  Tensor hidden = conv2d(f_apn.collapse_max(), w.hidden, Padding::Same);
  relu_inplace(hidden);
  Tensor out = conv2d(hidden, w.output, Padding::Same);
  if (out.dim(0) != 4) throw InvalidInput("agn: output layer must produce 4 channels");
  return out;
}

inline AnchorField agn_forward(const ScaledTensor& f_apn, const AgnWeights& w,
                               const AnchorGeometry& g) {
  ++call_counts.agn_forward;
  AnchorField field;
  field.rows = f_apn.height();
  field.cols = f_apn.width();
  field.anchors = decode_anchor_grid(agn_offsets(f_apn, w), g);
  field.features = f_apn;
  return field;
}

struct ProposalOutput {
  ScaledTensor f_apn;
  AnchorField anchors;
};

/// Proposal stage from precomputed correlations: R_d is the deep scale-aware
/// correlation, R_s the lifted shallow correlation.
inline ProposalOutput sa_apn_from_correlations(const ScaledTensor& r_d, const ScaledTensor& r_s,
                                               const SaApnWeights& w, const AnchorGeometry& g) {
  ++call_counts.sa_apn_forward;
  ProposalOutput out;
  out.f_apn = fuse_apn_features(r_d, r_s, w.fusion);
  out.anchors = agn_forward(out.f_apn, w.agn, g);
  return out;
}

/// Shallow correlation R_s: plain depthwise correlation on layer 4, lifted
/// onto the scale stack after correlating.
inline ScaledTensor shallow_correlation(const SiameseFeatures& z, const SiameseFeatures& x,
                                        const std::vector<std::size_t>& dilations) {
  return lift_to_scale_stack(depthwise_xcorr(x.phi4, z.phi4), dilations);
}

inline ProposalOutput sa_apn_forward(const SiameseFeatures& z, const SiameseFeatures& x,
                                     const SaApnWeights& w, const AnchorGeometry& g) {
  const ScaledTensor r_d = se_dw_xcorr(x.phi5, z.phi5);
  const ScaledTensor r_s = shallow_correlation(z, x, r_d.dilations());
  return sa_apn_from_correlations(r_d, r_s, w, g);
}

inline SaApnWeights random_sa_apn_weights(std::size_t channels, std::size_t hidden, Rng& rng) {
  SaApnWeights w;
  w.fusion.attention = random_projection_set(rng);
  w.fusion.projection = ConvKernel(channels, 2 * channels, 1, 1);
  he_uniform(w.fusion.projection, rng);
  w.agn.hidden = ConvKernel(hidden, channels, 3, 3);
  he_uniform(w.agn.hidden, rng);
  w.agn.output = ConvKernel(4, hidden, 3, 3);
  // Small output gain keeps untrained offsets near the base anchors.
  he_uniform(w.agn.output, rng, 0.05);
  return w;
}

}  // namespace siamsa

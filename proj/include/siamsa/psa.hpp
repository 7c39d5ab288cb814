#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "siamsa/instrumentation.hpp"
#include "siamsa/ops.hpp"
#include "siamsa/rng.hpp"
#include "siamsa/se_backbone.hpp"

namespace siamsa {

/// Three-tap 1-D convolution along the scale axis, zero padded, shared by all
/// channels and spatially 1×1. On a one-scale stack only the center tap acts.
struct ScaleProjection {
  std::array<double, 3> taps{0.0, 1.0, 0.0};
  double bias = 0.0;

  static ScaleProjection identity() { return {}; }

  /// Applies along axis 1 of a C×S tensor or a C×S×H×W tensor.
  Tensor apply(const Tensor& x) const {
    if (x.rank() < 2 || x.axes()[1] != Axis::Scale)
      throw InvalidInput("scale projection: axis 1 must be the scale axis");
    const std::size_t c = x.dim(0), S = x.dim(1);
    const std::size_t inner = x.size() / (c * S);
    Tensor out(x.axes(), x.shape(), bias);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t s = 0; s < S; ++s) {
        double* dst = out.data().data() + (ch * S + s) * inner;
        for (std::size_t t = 0; t < 3; ++t) {
          const auto src_s = static_cast<std::ptrdiff_t>(s + t) - 1;
          if (src_s < 0 || src_s >= static_cast<std::ptrdiff_t>(S) || taps[t] == 0.0) continue;
          const double* src =
              x.data().data() + (ch * S + static_cast<std::size_t>(src_s)) * inner;
          for (std::size_t i = 0; i < inner; ++i) dst[i] += taps[t] * src[i];
        }
      }
    return require_finite(std::move(out), "scale projection");
  }
};

struct ProjectionSet {
  ScaleProjection query;
  ScaleProjection key;
  ScaleProjection value;
};

struct SelfAttentionParams {
  ProjectionSet proj;
  double gamma = 0.1;
};

struct CrossAttentionParams {
  ProjectionSet proj;  // query/key act on the correlation side, value on the other
  double gamma = 0.1;
};

/// Weights of the pairwise block: one self-attention per feature source plus
/// the cross-attention joining them.
struct AttentionWeights {
  SelfAttentionParams self_corr;
  SelfAttentionParams self_apn;
  CrossAttentionParams cross;

  static AttentionWeights identity(double gamma) {
    AttentionWeights w;
    w.self_corr.gamma = w.self_apn.gamma = w.cross.gamma = gamma;
    return w;
  }
};

inline ScaleProjection random_scale_projection(Rng& rng) {
  ScaleProjection p;
  p.taps = {rng.uniform(-0.25, 0.25), 1.0 + rng.uniform(-0.25, 0.25), rng.uniform(-0.25, 0.25)};
  return p;
}

inline ProjectionSet random_projection_set(Rng& rng) {
  ProjectionSet p;
  p.query = random_scale_projection(rng);
  p.key = random_scale_projection(rng);
  p.value = random_scale_projection(rng);
  return p;
}

struct QueryKey {
  std::vector<double> q;  // length C·S, index c·S + s
  std::vector<double> k;
};

/// Q from the average-pooled branch, K from the max-pooled branch.
inline QueryKey make_query_key(const ScaledTensor& x, const ProjectionSet& proj) {
  const Tensor q = proj.query.apply(global_pool(x.tensor(), PoolMode::Avg));
  const Tensor k = proj.key.apply(global_pool(x.tensor(), PoolMode::Max));
  return {q.storage(), k.storage()};
}

/// Row-softmax of the CS×CS outer product Q Kᵀ (softmax along the key axis).
inline Tensor attention_matrix(const QueryKey& qk) {
  if (qk.q.size() != qk.k.size()) throw InvalidInput("attention: query/key lengths differ");
  const std::size_t n = qk.q.size();
  Tensor logits = Tensor::matrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) logits[i * n + j] = qk.q[i] * qk.k[j];
  return softmax(logits);
}

/// Attention · V where V is the value stack viewed as (C·S)×(H·W).
inline ScaledTensor apply_attention(const Tensor& weights, const ScaledTensor& values) {
  const std::size_t n = values.channels() * values.scales();
  const std::size_t hw = values.height() * values.width();
  if (weights.dim(0) != n || weights.dim(1) != n)
    throw InvalidInput(detail::concat("attention: matrix is ", weights.dim(0), "x",
                                      weights.dim(1), " but values carry ", n, " rows"));
  Tensor out(values.tensor().axes(), values.tensor().shape());
  const double* v = values.tensor().data().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* dst = out.data().data() + i * hw;
    for (std::size_t j = 0; j < n; ++j) {
      const double a = weights[i * n + j];
      const double* src = v + j * hw;
      for (std::size_t p = 0; p < hw; ++p) dst[p] += a * src[p];
    }
  }
  return ScaledTensor(require_finite(std::move(out), "attention"), values.dilations());
}

namespace detail {

inline ScaledTensor residual_add(const ScaledTensor& base, double gamma, const ScaledTensor& a) {
  Tensor out = base.tensor();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += gamma * a.tensor()[i];
  return ScaledTensor(require_finite(std::move(out), "residual"), base.dilations());
}

}  // namespace detail

/// Scale-channel self-attention map A (before the residual).
inline ScaledTensor self_attention_map(const ScaledTensor& x, const ProjectionSet& proj) {
  const ScaledTensor v(proj.value.apply(x.tensor()), x.dilations());
  return apply_attention(attention_matrix(make_query_key(x, proj)), v);
}

/// x + γ·A. A zero γ returns x untouched.
inline ScaledTensor sc_self_attention(const ScaledTensor& x, const SelfAttentionParams& p) {
  ++call_counts.self_attention;
  if (p.gamma == 0.0) return x;
  return detail::residual_add(x, p.gamma, self_attention_map(x, p.proj));
}

/// Cross-attention map: queries and keys from `x_corr`, values from `x_apn`.
/// The map takes the value source's spatial extent.
inline ScaledTensor cross_attention_map(const ScaledTensor& x_corr, const ScaledTensor& x_apn,
                                        const ProjectionSet& proj) {
  if (x_corr.channels() != x_apn.channels() || x_corr.scales() != x_apn.scales())
    throw InvalidInput(detail::concat("cross attention: channel/scale axes differ (",
                                      x_corr.channels(), "x", x_corr.scales(), " vs ",
                                      x_apn.channels(), "x", x_apn.scales(), ")"));
  const ScaledTensor v(proj.value.apply(x_apn.tensor()), x_apn.dilations());
  return apply_attention(attention_matrix(make_query_key(x_corr, proj)), v);
}

/// x_apn + γ·A^c.
inline ScaledTensor sc_cross_attention(const ScaledTensor& x_corr, const ScaledTensor& x_apn,
                                       const CrossAttentionParams& p) {
  ++call_counts.cross_attention;
  if (x_corr.channels() != x_apn.channels() || x_corr.scales() != x_apn.scales())
    throw InvalidInput(detail::concat("cross attention: channel/scale axes differ (",
                                      x_corr.channels(), "x", x_corr.scales(), " vs ",
                                      x_apn.channels(), "x", x_apn.scales(), ")"));
  if (p.gamma == 0.0) return x_apn;
  return detail::residual_add(x_apn, p.gamma, cross_attention_map(x_corr, x_apn, p.proj));
}

/// Self-attention on each source independently, then cross-attention with
/// queries/keys from the refined correlation map and values from the refined
/// proposal features.
inline ScaledTensor psan_forward(const ScaledTensor& r_corr, const ScaledTensor& f_apn,
                                 const AttentionWeights& w) {
  ++call_counts.psan_forward;
  const ScaledTensor corr = sc_self_attention(r_corr, w.self_corr);
  const ScaledTensor apn = sc_self_attention(f_apn, w.self_apn);
  return sc_cross_attention(corr, apn, w.cross);
}

}  // namespace siamsa

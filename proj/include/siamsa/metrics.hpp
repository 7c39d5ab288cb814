#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "siamsa/bbox.hpp"
#include "siamsa/tensor.hpp"

namespace siamsa {

/// Intersection over union; 0 when the union is empty.
inline double iou(const BBox& a, const BBox& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// A function sampled on the uniform grid start, ..., stop.
struct Curve {
  double start = 0.0;
  double stop = 1.0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double threshold(std::size_t i) const {
    return start + (stop - start) * static_cast<double>(i) / static_cast<double>(values.size() - 1);
  }
};

inline constexpr std::size_t kSuccessSamples = 101;  // IoU thresholds 0, 0.01, ..., 1
inline constexpr double kNpMax = 0.5;
inline constexpr std::size_t kNpSamples = 101;  // 0, 0.005, ..., 0.5

inline double success_threshold(std::size_t i) { return static_cast<double>(i) / 100.0; }
inline double np_threshold(std::size_t i) { return static_cast<double>(i) / 200.0; }

/// Center error normalized per axis by the ground-truth extent. Infinite when
/// the ground truth has no extent, so such frames never count as precise.
inline double normalized_center_error(const BBox& pred, const BBox& gt) {
  if (!(gt.w > 0.0 && gt.h > 0.0)) return std::numeric_limits<double>::infinity();
  return std::hypot((pred.cx() - gt.cx()) / gt.w, (pred.cy() - gt.cy()) / gt.h);
}

struct CurvePair {
  Curve success;  // fraction of frames with IoU > t
  Curve np;       // fraction of frames with normalized center error <= t
};

inline CurvePair success_and_precision_curves(const std::vector<BBox>& pred,
                                              const std::vector<BBox>& gt) {
  if (pred.size() != gt.size())
    throw InvalidInput(detail::concat("curves: ", pred.size(), " predictions vs ", gt.size(),
                                      " ground-truth boxes"));
  if (gt.empty()) throw InvalidInput("curves: empty sequence");
  CurvePair out{{0.0, 1.0, std::vector<double>(kSuccessSamples, 0.0)},
                {0.0, kNpMax, std::vector<double>(kNpSamples, 0.0)}};
  for (std::size_t f = 0; f < gt.size(); ++f) {
    const double o = iou(pred[f], gt[f]);
    const double e = normalized_center_error(pred[f], gt[f]);
    for (std::size_t i = 0; i < kSuccessSamples; ++i)
      if (o > success_threshold(i)) out.success.values[i] += 1.0;
    for (std::size_t i = 0; i < kNpSamples; ++i)
      if (e <= np_threshold(i)) out.np.values[i] += 1.0;
  }
  const double n = static_cast<double>(gt.size());
  for (double& v : out.success.values) v /= n;
  for (double& v : out.np.values) v /= n;
  return out;
}

/// Trapezoidal integral divided by the threshold range.
inline double auc(const Curve& c) {
  if (c.values.size() < 2) throw InvalidInput("auc: need at least 2 samples");
  if (!(c.stop > c.start)) throw InvalidInput("auc: empty threshold range");
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < c.values.size(); ++i) acc += c.values[i] + c.values[i + 1];
  return acc / (2.0 * static_cast<double>(c.values.size() - 1));
}

// ---------------------------------------------------------------------------
// Scale-variation statistics

inline constexpr std::size_t kSvBins = 15;  // [1.0,1.1), ..., [2.4,2.5) over |log2 R|

/// Frame counts over |log2 R| where R is the area ratio to the first box.
/// Frames with |log2 R| > 1 are scale-variation frames; those at or beyond
/// 2.5 count as SV but fall outside every bin.
struct SvHistogram {
  std::array<std::size_t, kSvBins> counts{};
  std::size_t total_frames = 0;
  std::size_t sv_frames = 0;

  static double bin_low(std::size_t i) { return 1.0 + static_cast<double>(i) / 10.0; }
  static double bin_high(std::size_t i) { return 1.0 + static_cast<double>(i + 1) / 10.0; }

  std::array<double, kSvBins> fractions() const {
    std::array<double, kSvBins> f{};
    if (total_frames == 0) return f;
    for (std::size_t i = 0; i < kSvBins; ++i)
      f[i] = static_cast<double>(counts[i]) / static_cast<double>(total_frames);
    return f;
  }

  SvHistogram& operator+=(const SvHistogram& o) {
    for (std::size_t i = 0; i < kSvBins; ++i) counts[i] += o.counts[i];
    total_frames += o.total_frames;
    sv_frames += o.sv_frames;
    return *this;
  }
};

/// Bin index for |log2 R|, or nullopt when the frame is not SV or exceeds 2.5.
inline std::optional<std::size_t> sv_bin(double abs_log2_ratio) {
  if (!(abs_log2_ratio > 1.0) || !(abs_log2_ratio < 2.5)) return std::nullopt;
  const auto tenth = static_cast<std::size_t>(std::floor(abs_log2_ratio * 10.0));
  return std::min<std::size_t>(kSvBins - 1, tenth - 10);
}

/// Counts frames whose area ratio to the first box leaves [0.5, 2]. Frames
/// with an empty box (target absent) count toward the total only.
inline SvHistogram sv_histogram(const std::vector<BBox>& gt) {
  if (gt.empty() || !gt.front().positive())
    throw InvalidInput("sv_histogram: first box must have positive area");
  SvHistogram h;
  const double a0 = gt.front().area();
  for (const BBox& b : gt) {
    ++h.total_frames;
    if (!(b.area() > 0.0)) continue;
    const double v = std::abs(std::log2(b.area() / a0));
    if (!(v > 1.0)) continue;
    ++h.sv_frames;
    if (auto bin = sv_bin(v)) ++h.counts[*bin];
  }
  return h;
}

// ---------------------------------------------------------------------------
// Aggregation

struct SequenceMetrics {
  std::string name;
  std::size_t frames = 0;
  std::vector<std::string> attributes;
  CurvePair curves;
  double auc_success = 0.0;
  double auc_np = 0.0;
};

inline SequenceMetrics evaluate_sequence(const std::string& name,
                                         const std::vector<std::string>& attributes,
                                         const std::vector<BBox>& pred,
                                         const std::vector<BBox>& gt) {
  SequenceMetrics m;
  m.name = name;
  m.frames = gt.size();
  m.attributes = attributes;
  m.curves = success_and_precision_curves(pred, gt);
  m.auc_success = auc(m.curves.success);
  m.auc_np = auc(m.curves.np);
  return m;
}

/// Per-sequence mean of curves and AUCs (sequences weigh equally).
struct Aggregate {
  std::size_t sequences = 0;
  CurvePair curves;
  double auc_success = 0.0;
  double auc_np = 0.0;
};

/// Reduces in name order so the result does not depend on input order.
inline Aggregate aggregate(std::vector<const SequenceMetrics*> items) {
  if (items.empty()) throw InvalidInput("aggregate: no sequences");
  std::sort(items.begin(), items.end(),
            [](const SequenceMetrics* a, const SequenceMetrics* b) { return a->name < b->name; });
  Aggregate g;
  g.sequences = items.size();
  g.curves.success = {0.0, 1.0, std::vector<double>(kSuccessSamples, 0.0)};
  g.curves.np = {0.0, kNpMax, std::vector<double>(kNpSamples, 0.0)};
  for (const SequenceMetrics* m : items) {
    for (std::size_t i = 0; i < kSuccessSamples; ++i) g.curves.success.values[i] += m->curves.success.values[i];
    for (std::size_t i = 0; i < kNpSamples; ++i) g.curves.np.values[i] += m->curves.np.values[i];
    g.auc_success += m->auc_success;
    g.auc_np += m->auc_np;
  }
  const double n = static_cast<double>(items.size());
  for (double& v : g.curves.success.values) v /= n;
  for (double& v : g.curves.np.values) v /= n;
  g.auc_success /= n;
  g.auc_np /= n;
  return g;
}

inline Aggregate aggregate(const std::vector<SequenceMetrics>& all) {
  std::vector<const SequenceMetrics*> items;
  for (const auto& m : all) items.push_back(&m);
  return aggregate(std::move(items));
}

inline constexpr std::array<const char*, 11> kAttributeTags{"ARC", "OV",  "BC", "FM",  "LI",   "OB",
                                                            "POC", "SV",  "SOB", "VC", "UAM-A"};

inline bool is_attribute_tag(const std::string& tag) {
  return std::find_if(kAttributeTags.begin(), kAttributeTags.end(),
                      [&](const char* t) { return tag == t; }) != kAttributeTags.end();
}

/// Aggregate per attribute tag; tags carried by no sequence map to nullopt.
inline std::map<std::string, std::optional<Aggregate>> attribute_report(
    const std::vector<SequenceMetrics>& metrics) {
  std::map<std::string, std::optional<Aggregate>> out;
  for (const char* tag : kAttributeTags) {
    std::vector<const SequenceMetrics*> items;
    for (const auto& m : metrics)
      if (std::find(m.attributes.begin(), m.attributes.end(), tag) != m.attributes.end())
        items.push_back(&m);
    out[tag] = items.empty() ? std::nullopt : std::optional<Aggregate>(aggregate(std::move(items)));
  }
  return out;
}

}  // namespace siamsa

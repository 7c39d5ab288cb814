#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "siamsa/bbox.hpp"
#include "siamsa/image.hpp"
#include "siamsa/instrumentation.hpp"
#include "siamsa/psa.hpp"
#include "siamsa/sa_apn.hpp"
#include "siamsa/se_backbone.hpp"
#include "siamsa/text.hpp"
#include "siamsa/weights_io.hpp"

namespace siamsa {

struct TrackerConfig {
  BackboneConfig backbone;
  double context_margin = 0.5;
  double window_influence = 0.40;
  double size_smoothing = 0.30;
  bool enable_psan = true;
  bool enable_sa_apn = true;
  std::uint64_t seed = 1;
  // Initial values for the untrained weight bank; a weights file overrides them.
  double gamma = 0.1;
  double lambda1 = 0.5;
  double lambda2 = 0.5;
  std::size_t agn_hidden = 16;

  std::size_t template_size() const { return backbone.template_size; }
  std::size_t search_size() const { return backbone.search_size; }

  void validate() const {
    backbone.validate();
    if (!(context_margin >= 0.0) || !std::isfinite(context_margin))
      throw InvalidInput("config: context_margin must be >= 0");
    if (!(window_influence >= 0.0 && window_influence <= 1.0))
      throw InvalidInput("config: window_influence must lie in [0, 1]");
    if (!(size_smoothing >= 0.0 && size_smoothing <= 1.0))
      throw InvalidInput("config: size_smoothing must lie in [0, 1]");
    if (!std::isfinite(gamma) || !std::isfinite(lambda1) || !std::isfinite(lambda2))
      throw InvalidInput("config: gamma/lambda must be finite");
    if (agn_hidden == 0) throw InvalidInput("config: agn_hidden must be positive");
  }

  /// Applies `key = value` overrides. Unknown keys are rejected.
  void apply(const KeyValues& kv, const std::string& source) {
    for (const auto& [key, value] : kv) {
      const std::string what = source + ": " + key;
      if (key == "template_size") backbone.template_size = parse_uint(value, what);
      else if (key == "search_size") backbone.search_size = parse_uint(value, what);
      else if (key == "context_margin") context_margin = parse_double(value, what);
      else if (key == "window_influence") window_influence = parse_double(value, what);
      else if (key == "size_smoothing") size_smoothing = parse_double(value, what);
      else if (key == "enable_psan") enable_psan = parse_bool(value, what);
      else if (key == "enable_sa_apn") enable_sa_apn = parse_bool(value, what);
      else if (key == "seed") seed = parse_uint(value, what);
      else if (key == "gamma") gamma = parse_double(value, what);
      else if (key == "lambda1") lambda1 = parse_double(value, what);
      else if (key == "lambda2") lambda2 = parse_double(value, what);
      else if (key == "agn_hidden") agn_hidden = parse_uint(value, what);
      else if (key == "inter_scale") backbone.inter_scale = parse_uint(value, what);
      else if (key == "scale_dilations") {
        backbone.scale_dilations.clear();
        for (auto part : split(value, ",")) backbone.scale_dilations.push_back(parse_uint(part, what));
      } else {
        throw InvalidInput(source + ": unknown config key '" + key + "'");
      }
    }
    validate();
  }

  static TrackerConfig load(const std::filesystem::path& path) {
    TrackerConfig cfg;
    cfg.apply(parse_key_values(read_text_file(path), path.string()), path.string());
    return cfg;
  }
};

struct HeadWeights {
  ConvKernel cls;  // 2 channels: background, foreground
  ConvKernel reg;  // 4 channels: dx, dy, dw, dh
};

/// Every parameter of the tracking network.
struct NetworkWeights {
  std::uint64_t seed = 0;
  BackboneWeights backbone;
  SeKernelBank se_phi5;
  AttentionWeights attention;
  SaApnWeights sa_apn;
  HeadWeights heads;

  /// Seeded initialization. Draw order is fixed, so a seed pins every value.
  static NetworkWeights random(const TrackerConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    NetworkWeights w;
    w.seed = seed;
    const std::size_t c = cfg.backbone.feature_channels();
    w.backbone = BackboneWeights::random(cfg.backbone, rng);
    w.se_phi5 = random_se_bank(c, cfg.backbone.inter_scale, rng);
    w.attention.self_corr = {random_projection_set(rng), cfg.gamma};
    w.attention.self_apn = {random_projection_set(rng), cfg.gamma};
    w.attention.cross = {random_projection_set(rng), cfg.gamma};
    w.sa_apn = random_sa_apn_weights(c, cfg.agn_hidden, rng);
    w.sa_apn.fusion.lambda1 = cfg.lambda1;
    w.sa_apn.fusion.lambda2 = cfg.lambda2;
    // Foreground logit starts as the channel-mean response plus noise, so an
    // untrained head still ranks cells by correlation strength.
    w.heads.cls = ConvKernel(2, c, 3, 3);
    he_uniform(w.heads.cls, rng, 0.05);
    for (std::size_t i = 0; i < c; ++i) w.heads.cls.w(1, i, 1, 1) += 1.0 / static_cast<double>(c);
    w.heads.reg = ConvKernel(4, c, 3, 3);
    he_uniform(w.heads.reg, rng, 0.01);
    return w;
  }

  WeightStore to_store() const {
    WeightStore s;
    s.seed = seed;
    for (std::size_t i = 0; i < backbone.layers.size(); ++i)
      s.put_kernel("backbone." + std::to_string(i + 1), backbone.layers[i]);
    for (std::size_t o = 0; o < se_phi5.offsets.size(); ++o)
      s.put_kernel("se.phi5.offset" + std::to_string(o), se_phi5.offsets[o]);
    auto put_proj = [&](const std::string& n, const ProjectionSet& p) {
      for (auto [suffix, sp] : {std::pair{"query", &p.query}, {"key", &p.key}, {"value", &p.value}}) {
        s.put(n + "." + suffix + ".taps", {3}, {sp->taps.begin(), sp->taps.end()});
        s.put_scalar(n + "." + suffix + ".bias", sp->bias);
      }
    };
    put_proj("psa.self_corr", attention.self_corr.proj);
    s.put_scalar("psa.self_corr.gamma", attention.self_corr.gamma);
    put_proj("psa.self_apn", attention.self_apn.proj);
    s.put_scalar("psa.self_apn.gamma", attention.self_apn.gamma);
    put_proj("psa.cross", attention.cross.proj);
    s.put_scalar("psa.cross.gamma", attention.cross.gamma);
    put_proj("apn.fusion.attention", sa_apn.fusion.attention);
    s.put_scalar("apn.fusion.lambda1", sa_apn.fusion.lambda1);
    s.put_scalar("apn.fusion.lambda2", sa_apn.fusion.lambda2);
    s.put_kernel("apn.fusion.projection", sa_apn.fusion.projection);
    s.put_kernel("apn.agn.hidden", sa_apn.agn.hidden);
    s.put_kernel("apn.agn.output", sa_apn.agn.output);
    s.put_kernel("head.cls", heads.cls);
    s.put_kernel("head.reg", heads.reg);
    return s;
  }

  static NetworkWeights from_store(const WeightStore& s, const TrackerConfig& cfg) {
    cfg.validate();
    NetworkWeights w;
    w.seed = s.seed;
    std::size_t in = 3;
    for (std::size_t i = 0; i < cfg.backbone.layers.size(); ++i) {
      const auto& l = cfg.backbone.layers[i];
      w.backbone.layers.push_back(
          s.kernel("backbone." + std::to_string(i + 1), l.out_channels, in, l.kernel, l.kernel));
      in = l.out_channels;
    }
    const std::size_t c = cfg.backbone.feature_channels();
    for (std::size_t o = 0; o < cfg.backbone.inter_scale; ++o)
      w.se_phi5.offsets.push_back(s.kernel("se.phi5.offset" + std::to_string(o), c, c, 3, 3));
    auto get_proj = [&](const std::string& n) {
      ProjectionSet p;
      for (auto [suffix, sp] : {std::pair{"query", &p.query}, {"key", &p.key}, {"value", &p.value}}) {
        const auto& taps = s.get(n + "." + suffix + ".taps", {3}).values;
        std::copy(taps.begin(), taps.end(), sp->taps.begin());
        sp->bias = s.scalar(n + "." + suffix + ".bias");
      }
      return p;
    };
    w.attention.self_corr = {get_proj("psa.self_corr"), s.scalar("psa.self_corr.gamma")};
    w.attention.self_apn = {get_proj("psa.self_apn"), s.scalar("psa.self_apn.gamma")};
    w.attention.cross = {get_proj("psa.cross"), s.scalar("psa.cross.gamma")};
    w.sa_apn.fusion.attention = get_proj("apn.fusion.attention");
    w.sa_apn.fusion.lambda1 = s.scalar("apn.fusion.lambda1");
    w.sa_apn.fusion.lambda2 = s.scalar("apn.fusion.lambda2");
    w.sa_apn.fusion.projection = s.kernel("apn.fusion.projection", c, 2 * c, 1, 1);
    w.sa_apn.agn.hidden = s.kernel("apn.agn.hidden", cfg.agn_hidden, c, 3, 3);
    w.sa_apn.agn.output = s.kernel("apn.agn.output", 4, cfg.agn_hidden, 3, 3);
    w.heads.cls = s.kernel("head.cls", 2, c, 3, 3);
    w.heads.reg = s.kernel("head.reg", 4, c, 3, 3);
    return w;
  }
};

/// Maps frame pixels into the current search patch.
struct SearchRegion {
  double cx = 0.0;
  double cy = 0.0;
  double scale = 1.0;  // patch pixels per frame pixel
  double patch_size = 287.0;

  double to_frame_x(double px) const { return cx + (px - patch_size / 2.0) / scale; }
  double to_frame_y(double py) const { return cy + (py - patch_size / 2.0) / scale; }
};

/// Outer product of two Hann windows, peak 1 at the center cell.
inline std::vector<double> hann_window(std::size_t rows, std::size_t cols) {
  auto hann = [](std::size_t n) {
    std::vector<double> v(n, 1.0);
    if (n > 1)
      for (std::size_t i = 0; i < n; ++i)
        v[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n - 1));
    return v;
  };
  const auto r = hann(rows), c = hann(cols);
  std::vector<double> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = r[i] * c[j];
  return out;
}

/// Index of the best score after multiplying by window^influence. Ties go to
/// the first cell in row-major order.
inline std::size_t select_peak(std::span<const double> scores, std::span<const double> window,
                               double influence) {
  if (scores.size() != window.size() || scores.empty())
    throw InvalidInput("select_peak: score map and window differ in size");
  std::size_t best = 0;
  double best_v = -1.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double v = scores[i] * std::pow(window[i], influence);
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  return best;
}

/// Two-way softmax, foreground probability per cell.
inline std::vector<double> foreground_probability(const Tensor& cls) {
  cls.require_layout({Axis::Channel, Axis::Height, Axis::Width}, "foreground_probability");
  if (cls.dim(0) != 2) throw InvalidInput("foreground_probability: expected 2 class channels");
  const std::size_t n = cls.dim(1) * cls.dim(2);
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double bg = cls[i], fg = cls[n + i];
    const double m = std::max(bg, fg);
    const double eb = std::exp(bg - m), ef = std::exp(fg - m);
    p[i] = ef / (eb + ef);
  }
  return p;
}

struct Detection {
  BBox box;
  double score = 0.0;
};

/// Picks the best cell, refines its anchor by the regression offsets, maps the
/// box to frame pixels and smooths its size toward `prev`.
inline Detection decode_and_select(const Tensor& cls, const Tensor& reg, const AnchorField& anchors,
                                   const BBox& prev, const SearchRegion& region,
                                   const AnchorGeometry& geom, double window_influence,
                                   double size_smoothing) {
  cls.require_layout({Axis::Channel, Axis::Height, Axis::Width}, "decode_and_select");
  reg.require_layout({Axis::Channel, Axis::Height, Axis::Width}, "decode_and_select");
  if (reg.dim(0) != 4) throw InvalidInput("decode_and_select: expected 4 regression channels");
  const std::size_t rows = cls.dim(1), cols = cls.dim(2);
  if (reg.dim(1) != rows || reg.dim(2) != cols || anchors.rows != rows || anchors.cols != cols ||
      anchors.anchors.size() != rows * cols)
    throw InvalidInput(detail::concat("decode_and_select: extents differ (cls ", rows, "x", cols,
                                      ", reg ", reg.dim(1), "x", reg.dim(2), ", anchors ",
                                      anchors.rows, "x", anchors.cols, ")"));
  const std::vector<double> prob = foreground_probability(cls);
  const std::size_t best = select_peak(prob, hann_window(rows, cols), window_influence);
  const std::size_t r = best / cols, c = best % cols;
  const BBox& a = anchors.at(r, c);
  const BBox cand = decode_offsets(a.cx(), a.cy(), a.w, a.h, reg.at(0, r, c), reg.at(1, r, c),
                                   reg.at(2, r, c), reg.at(3, r, c), geom);
  const double w = size_smoothing * prev.w + (1.0 - size_smoothing) * (cand.w / region.scale);
  const double h = size_smoothing * prev.h + (1.0 - size_smoothing) * (cand.h / region.scale);
  return {BBox::from_center(region.to_frame_x(cand.cx()), region.to_frame_y(cand.cy()), w, h),
          prob[best]};
}

struct TrackerState {
  bool initialized = false;
  BBox box;
  Color pad{};
  SiameseFeatures templ;
};

/// Intermediate maps of one search step, exposed for inspection and tests.
struct SearchTrace {
  SearchRegion region;
  AnchorGeometry geometry;
  ScaledTensor correlation;  // deep scale-aware correlation
  ScaledTensor head_input;
  AnchorField anchors;
  Tensor cls;
  Tensor reg;
};

class Tracker {
 public:
  Tracker(TrackerConfig cfg, std::shared_ptr<const NetworkWeights> weights)
      : cfg_(std::move(cfg)), weights_(std::move(weights)) {
    cfg_.validate();
    if (!weights_) throw InvalidInput("tracker: no weights");
  }

  const TrackerConfig& config() const { return cfg_; }
  const NetworkWeights& weights() const { return *weights_; }

  /// Backbone plus scale lifting for one patch.
  SiameseFeatures extract(const Tensor& patch) const {
    BackboneFeatures f = backbone_forward(patch, cfg_.backbone, weights_->backbone);
    return {std::move(f.phi4), scale_equivariant_features(f.phi5, cfg_.backbone, weights_->se_phi5)};
  }

  /// Template features divided by their spatial area, so correlating with
  /// them yields mean rather than summed products.
  static SiameseFeatures template_kernels(SiameseFeatures z) {
    const double a4 = static_cast<double>(z.phi4.dim(1) * z.phi4.dim(2));
    for (double& v : z.phi4.data()) v /= a4;
    const double a5 = static_cast<double>(z.phi5.height() * z.phi5.width());
    for (double& v : z.phi5.tensor().data()) v /= a5;
    return z;
  }

  TrackerState init(const Image& frame, const BBox& box) const {
    if (!box.positive()) throw InvalidInput("tracker init: box must have positive area");
    TrackerState st;
    st.pad = channel_mean(frame);
    st.templ = template_kernels(extract(crop_patch(frame, box, cfg_.template_size(),
                                                   cfg_.context_margin, st.pad,
                                                   cfg_.template_size())));
    st.box = box;
    st.initialized = true;
    return st;
  }

  SearchRegion search_region(const BBox& box) const {
    const double side = context_side(box, cfg_.context_margin) *
                        static_cast<double>(cfg_.search_size()) /
                        static_cast<double>(cfg_.template_size());
    return {box.cx(), box.cy(), static_cast<double>(cfg_.search_size()) / side,
            static_cast<double>(cfg_.search_size())};
  }

  /// Runs the network on the search patch around the current box.
  SearchTrace search(const TrackerState& st, const Image& frame) const {
    if (!st.initialized) throw InvalidInput("track_frame: tracker state is not initialized");
    SearchTrace t;
    t.region = search_region(st.box);
    const Tensor patch = crop_square(frame, t.region.cx, t.region.cy,
                                     t.region.patch_size / t.region.scale, cfg_.search_size(),
                                     st.pad);
    const SiameseFeatures x = extract(patch);
    t.geometry = {std::sqrt(st.box.w * st.box.h) * t.region.scale,
                  static_cast<double>(cfg_.backbone.total_stride()),
                  static_cast<double>(cfg_.search_size())};
    t.correlation = se_dw_xcorr(x.phi5, st.templ.phi5);

    ScaledTensor proposal_features;
    if (cfg_.enable_sa_apn) {
      const ScaledTensor shallow = shallow_correlation(st.templ, x, t.correlation.dilations());
      ProposalOutput p = sa_apn_from_correlations(t.correlation, shallow, weights_->sa_apn,
                                                  t.geometry);
      proposal_features = std::move(p.f_apn);
      t.anchors = std::move(p.anchors);
    } else {
      proposal_features = t.correlation;
      t.anchors = base_anchor_field(t.correlation, t.geometry);
    }
    t.head_input = cfg_.enable_psan
                       ? psan_forward(t.correlation, proposal_features, weights_->attention)
                       : std::move(proposal_features);
    const Tensor collapsed = t.head_input.collapse_max();
    t.cls = conv2d(collapsed, weights_->heads.cls, Padding::Same);
    t.reg = conv2d(collapsed, weights_->heads.reg, Padding::Same);
    return t;
  }

  /// One tracking step. The returned box lies inside the frame with positive area.
  Detection track_frame(TrackerState& st, const Image& frame) const {
    const SearchTrace t = search(st, frame);
    Detection d = decode_and_select(t.cls, t.reg, t.anchors, st.box, t.region, t.geometry,
                                    cfg_.window_influence, cfg_.size_smoothing);
    d.box = clamp_to_frame(d.box, static_cast<double>(image_width(frame)),
                           static_cast<double>(image_height(frame)));
    if (!d.box.positive() || !(d.score >= 0.0 && d.score <= 1.0))
      throw InvariantViolation("track_frame: produced an invalid detection");
    st.box = d.box;
    return d;
  }

 private:
  TrackerConfig cfg_;
  std::shared_ptr<const NetworkWeights> weights_;
};

/// Weights from `path` when given, otherwise seeded random initialization.
inline std::shared_ptr<const NetworkWeights> load_or_init_weights(
    const TrackerConfig& cfg, const std::filesystem::path& path) {
  if (path.empty())
    return std::make_shared<const NetworkWeights>(NetworkWeights::random(cfg, cfg.seed));
  return std::make_shared<const NetworkWeights>(
      NetworkWeights::from_store(WeightStore::load(path), cfg));
}

}  // namespace siamsa

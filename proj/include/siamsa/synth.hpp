#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "siamsa/bbox.hpp"
#include "siamsa/dataset.hpp"
#include "siamsa/image.hpp"
#include "siamsa/image_io.hpp"
#include "siamsa/rng.hpp"
#include "siamsa/text.hpp"

namespace siamsa {

/// Parameters of a synthetic approach sequence: a textured rectangle over a
/// textured background, moving along a drift-plus-sinusoid path while its
/// area grows as 2^(zoom_rate·t/(N-1)).
struct SynthSpec {
  std::string name = "synth";
  std::size_t frames = 20;
  std::size_t width = 320;
  std::size_t height = 240;
  double object_w = 40.0;
  double object_h = 40.0;
  double start_cx = -1.0;  // negative: frame center
  double start_cy = -1.0;
  double velocity_x = 0.0;  // px per frame
  double velocity_y = 0.0;
  double wobble_x = 0.0;  // sinusoid amplitude, px
  double wobble_y = 0.0;
  double wobble_period = 20.0;  // frames
  double zoom_rate = 0.0;       // log2 of the final-to-initial area ratio
  long occlusion_start = -1;    // first occluded frame (0-based), negative: none
  long occlusion_end = -1;      // last occluded frame
  double occlusion_fraction = 0.5;  // share of the object width covered

  double initial_cx() const { return start_cx < 0.0 ? static_cast<double>(width) / 2.0 : start_cx; }
  double initial_cy() const { return start_cy < 0.0 ? static_cast<double>(height) / 2.0 : start_cy; }

  /// Exact log2 of the area ratio at frame t.
  double log2_area_ratio(std::size_t t) const {
    if (frames < 2) return 0.0;
    return zoom_rate * static_cast<double>(t) / static_cast<double>(frames - 1);
  }

  BBox box_at(std::size_t t) const {
    const double k = std::exp2(log2_area_ratio(t) / 2.0);
    const double ft = static_cast<double>(t);
    const double phase = 2.0 * M_PI * ft / wobble_period;
    const double cx = initial_cx() + velocity_x * ft + wobble_x * std::sin(phase);
    const double cy = initial_cy() + velocity_y * ft + wobble_y * std::sin(phase);
    return BBox::from_center(cx, cy, object_w * k, object_h * k);
  }

  bool occluded(std::size_t t) const {
    return occlusion_start >= 0 && static_cast<long>(t) >= occlusion_start &&
           static_cast<long>(t) <= occlusion_end;
  }

  void validate() const {
    if (frames == 0) throw InvalidInput("synth: frame count must be positive");
    if (width == 0 || height == 0) throw InvalidInput("synth: frame size must be positive");
    if (!(object_w > 0.0) || !(object_h > 0.0))
      throw InvalidInput("synth: object size must be positive");
    if (!(wobble_period > 0.0)) throw InvalidInput("synth: wobble_period must be positive");
    if (!(occlusion_fraction >= 0.0 && occlusion_fraction <= 1.0))
      throw InvalidInput("synth: occlusion_fraction must lie in [0, 1]");
    for (double v : {velocity_x, velocity_y, wobble_x, wobble_y, zoom_rate, start_cx, start_cy})
      if (!std::isfinite(v)) throw InvalidInput("synth: non-finite parameter");
    const BBox b0 = box_at(0);
    if (b0.x < 0.0 || b0.y < 0.0 || b0.x + b0.w > static_cast<double>(width) ||
        b0.y + b0.h > static_cast<double>(height))
      throw InvalidInput("synth: object exceeds the frame at t=0");
  }

  void apply(const KeyValues& kv, const std::string& source) {
    for (const auto& [key, value] : kv) {
      const std::string what = source + ": " + key;
      if (key == "name") name = value;
      else if (key == "frames") frames = parse_uint(value, what);
      else if (key == "width") width = parse_uint(value, what);
      else if (key == "height") height = parse_uint(value, what);
      else if (key == "object_w") object_w = parse_double(value, what);
      else if (key == "object_h") object_h = parse_double(value, what);
      else if (key == "start_cx") start_cx = parse_double(value, what);
      else if (key == "start_cy") start_cy = parse_double(value, what);
      else if (key == "velocity_x") velocity_x = parse_double(value, what);
      else if (key == "velocity_y") velocity_y = parse_double(value, what);
      else if (key == "wobble_x") wobble_x = parse_double(value, what);
      else if (key == "wobble_y") wobble_y = parse_double(value, what);
      else if (key == "wobble_period") wobble_period = parse_double(value, what);
      else if (key == "zoom_rate") zoom_rate = parse_double(value, what);
      else if (key == "occlusion_start") occlusion_start = static_cast<long>(parse_double(value, what));
      else if (key == "occlusion_end") occlusion_end = static_cast<long>(parse_double(value, what));
      else if (key == "occlusion_fraction") occlusion_fraction = parse_double(value, what);
      else throw InvalidInput(source + ": unknown synth key '" + key + "'");
    }
    validate();
  }
};

/// A spec file may hold several sequences separated by `[name]` headers;
/// keys before the first header are defaults shared by all of them.
inline std::vector<SynthSpec> parse_synth_specs(const std::string& text, const std::string& source) {
  std::vector<std::pair<std::string, std::string>> sections{{"", ""}};
  for (std::string_view rest = text; !rest.empty();) {
    const auto nl = rest.find('\n');
    const std::string_view raw = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    const std::string_view line = trim(raw);
    if (line.size() >= 2 && line.front() == '[' && line.back() == ']') {
      sections.emplace_back(std::string(trim(line.substr(1, line.size() - 2))), "");
      continue;
    }
    sections.back().second += std::string(raw) + "\n";
  }
  const KeyValues defaults = parse_key_values(sections.front().second, source);
  std::vector<SynthSpec> specs;
  if (sections.size() == 1) {
    SynthSpec s;
    s.apply(defaults, source);
    specs.push_back(s);
    return specs;
  }
  for (std::size_t i = 1; i < sections.size(); ++i) {
    KeyValues kv = defaults;
    for (auto& [k, v] : parse_key_values(sections[i].second, source)) kv[k] = v;
    kv["name"] = sections[i].first;
    SynthSpec s;
    s.apply(kv, source);
    specs.push_back(s);
  }
  return specs;
}

struct SynthSequence {
  std::string name;
  std::vector<Image> frames;
  std::vector<BBox> ground_truth;
  std::vector<std::string> attributes;
};

/// Attribute tags implied by the parameters. SV uses the exact log-ratio of
/// the trajectory, so a final ratio of exactly 2 is not SV.
inline std::vector<std::string> synth_attributes(const SynthSpec& spec) {
  bool sv = false, fm = false, ov = false, poc = false;
  BBox prev = spec.box_at(0);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    const BBox b = spec.box_at(t);
    sv = sv || std::abs(spec.log2_area_ratio(t)) > 1.0;
    fm = fm || std::hypot(b.cx() - prev.cx(), b.cy() - prev.cy()) > 20.0;
    ov = ov || b.x < 0.0 || b.y < 0.0 || b.x + b.w > static_cast<double>(spec.width) ||
         b.y + b.h > static_cast<double>(spec.height);
    poc = poc || (spec.occluded(t) && spec.occlusion_fraction > 0.0);
    prev = b;
  }
  std::vector<std::string> tags;
  if (ov) tags.push_back("OV");
  if (fm) tags.push_back("FM");
  if (poc) tags.push_back("POC");
  if (sv) tags.push_back("SV");
  return tags;
}

/// Renders frame t. Pixel (i, j) covers [j, j+1)×[i, i+1); it belongs to the
/// object when its center lies inside the box.
inline Image render_synth_frame(const SynthSpec& spec, std::uint64_t seed, std::size_t t) {
  Image img = make_image(spec.width, spec.height);
  const BBox b = spec.box_at(t);
  const std::uint64_t bg_seed = splitmix64(seed ^ 0xb6ULL), obj_seed = splitmix64(seed ^ 0x0bULL);
  const bool occ = spec.occluded(t);
  const double occ_right = b.x + spec.occlusion_fraction * b.w;
  for (std::size_t i = 0; i < spec.height; ++i) {
    const double py = static_cast<double>(i) + 0.5;
    for (std::size_t j = 0; j < spec.width; ++j) {
      const double px = static_cast<double>(j) + 0.5;
      const bool inside = px >= b.x && px < b.x + b.w && py >= b.y && py < b.y + b.h;
      for (std::size_t c = 0; c < 3; ++c) {
        double v;
        if (inside && occ && px < occ_right) {
          v = 128.0;
        } else if (inside) {
          // Texture lives in object coordinates so it scales with the box.
          const double u = (px - b.x) / b.w * 64.0, w = (py - b.y) / b.h * 64.0;
          v = 40.0 + 215.0 * value_noise(obj_seed + c, u, w, 8.0);
        } else {
          v = 30.0 + 120.0 * value_noise(bg_seed + c, px, py, 16.0);
        }
        img.at(c, i, j) = v;
      }
    }
  }
  return img;
}

inline SynthSequence synth_sequence(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  SynthSequence seq;
  seq.name = spec.name;
  for (std::size_t t = 0; t < spec.frames; ++t) {
    seq.ground_truth.push_back(spec.box_at(t));
    seq.frames.push_back(render_synth_frame(spec, seed, t));
  }
  seq.attributes = synth_attributes(spec);
  return seq;
}

/// Writes the sequence in the dataset layout under root/<name>/.
inline SequenceRecord write_synth_sequence(const SynthSequence& seq, const fs::path& root) {
  const fs::path dir = root / seq.name;
  fs::create_directories(dir / "img");
  SequenceRecord rec;
  rec.name = seq.name;
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "%04zu.png", t + 1);
    rec.frames.push_back(dir / "img" / name);
    write_image(rec.frames.back(), seq.frames[t]);
  }
  write_boxes(dir / "groundtruth_rect.txt", seq.ground_truth);
  std::string tags;
  for (const auto& a : seq.attributes) tags += a + "\n";
  write_text_file(dir / "attributes.txt", tags);
  rec.ground_truth = seq.ground_truth;
  rec.attributes = seq.attributes;
  return rec;
}

}  // namespace siamsa

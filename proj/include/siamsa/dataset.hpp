#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <string>
#include <vector>

#include "siamsa/bbox.hpp"
#include "siamsa/metrics.hpp"
#include "siamsa/text.hpp"

namespace siamsa {

namespace fs = std::filesystem;

/// One benchmark sequence on disk:
///   <seq>/img/0001.jpg ...        frames, zero-padded numeric names
///   <seq>/groundtruth_rect.txt    x,y,w,h per frame (pixels, 0-based)
///   <seq>/attributes.txt          one tag per line
struct SequenceRecord {
  std::string name;
  std::vector<fs::path> frames;
  std::vector<BBox> ground_truth;
  std::vector<std::string> attributes;

  bool has_attribute(const std::string& tag) const {
    return std::find(attributes.begin(), attributes.end(), tag) != attributes.end();
  }
};

/// Parses `x,y,w,h` (commas, tabs or spaces as separators).
inline BBox parse_box_line(std::string_view line, const std::string& where) {
  const auto fields = split(line, ", \t");
  if (fields.size() != 4)
    throw InvalidInput(where + ": expected 4 fields x,y,w,h, got " + std::to_string(fields.size()));
  return {parse_double(fields[0], where), parse_double(fields[1], where),
          parse_double(fields[2], where), parse_double(fields[3], where)};
}

inline std::vector<BBox> parse_boxes(const std::string& text, const std::string& source) {
  std::vector<BBox> boxes;
  std::size_t line_no = 0;
  for (std::string_view rest = text; !rest.empty();) {
    const auto nl = rest.find('\n');
    const std::string_view line = trim(rest.substr(0, nl));
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    boxes.push_back(parse_box_line(line, source + ":" + std::to_string(line_no)));
  }
  return boxes;
}

inline std::vector<BBox> read_boxes(const fs::path& path) {
  return parse_boxes(read_text_file(path), path.string());
}

inline std::string format_boxes(const std::vector<BBox>& boxes) {
  std::string out;
  for (const BBox& b : boxes)
    out += format_double(b.x) + "," + format_double(b.y) + "," + format_double(b.w) + "," +
           format_double(b.h) + "\n";
  return out;
}

inline void write_boxes(const fs::path& path, const std::vector<BBox>& boxes) {
  write_text_file(path, format_boxes(boxes));
}

inline std::vector<std::string> parse_attributes(const std::string& text, const std::string& source) {
  std::vector<std::string> tags;
  for (auto tag : split(text, "\r\n")) {
    std::string t(tag);
    if (!is_attribute_tag(t)) throw InvalidInput(source + ": unknown attribute tag '" + t + "'");
    if (std::find(tags.begin(), tags.end(), t) == tags.end()) tags.push_back(std::move(t));
  }
  return tags;
}

namespace detail {

inline bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png";
}

inline bool numeric_stem(const fs::path& p, std::uint64_t& value) {
  const std::string stem = p.stem().string();
  if (stem.empty() || !std::all_of(stem.begin(), stem.end(), [](unsigned char c) { return std::isdigit(c); }))
    return false;
  value = parse_uint(stem, p.string());
  return true;
}

}  // namespace detail

inline SequenceRecord load_sequence(const fs::path& dir) {
  SequenceRecord rec;
  rec.name = dir.filename().string();
  const fs::path img_dir = dir / "img";
  if (!fs::is_directory(img_dir)) throw InvalidInput("sequence " + rec.name + ": missing img/ folder");

  std::vector<std::pair<std::uint64_t, fs::path>> numbered;
  for (const auto& entry : fs::directory_iterator(img_dir)) {
    if (!entry.is_regular_file() || !detail::is_image_file(entry.path())) continue;
    std::uint64_t idx = 0;
    if (!detail::numeric_stem(entry.path(), idx))
      throw InvalidInput("sequence " + rec.name + ": frame name is not numeric: " +
                         entry.path().filename().string());
    numbered.emplace_back(idx, entry.path());
  }
  std::sort(numbered.begin(), numbered.end());
  for (auto& [idx, path] : numbered) rec.frames.push_back(std::move(path));

  rec.ground_truth = read_boxes(dir / "groundtruth_rect.txt");
  if (rec.frames.size() != rec.ground_truth.size())
    throw InvalidInput("sequence " + rec.name + ": " + std::to_string(rec.frames.size()) +
                       " frames but " + std::to_string(rec.ground_truth.size()) +
                       " annotation lines");
  if (rec.frames.empty()) throw InvalidInput("sequence " + rec.name + ": no frames");
  if (!rec.ground_truth.front().positive())
    throw InvalidInput("sequence " + rec.name + ": first box must have positive area");
  const fs::path attr = dir / "attributes.txt";
  if (!fs::exists(attr)) throw InvalidInput("sequence " + rec.name + ": missing attributes.txt");
  rec.attributes = parse_attributes(read_text_file(attr), attr.string());
  return rec;
}

/// Subdirectories holding a ground-truth file, sorted by name.
inline std::vector<fs::path> list_sequences(const fs::path& root) {
  if (!fs::is_directory(root)) throw InvalidInput("dataset root not found: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory() && fs::exists(entry.path() / "groundtruth_rect.txt"))
      dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw InvalidInput("dataset " + root.string() + " holds no sequences");
  return dirs;
}

}  // namespace siamsa

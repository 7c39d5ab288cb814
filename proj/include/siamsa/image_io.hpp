#pragma once

#include <filesystem>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "siamsa/image.hpp"

namespace siamsa {

inline Image read_image(const std::filesystem::path& path) {
  const cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw InvalidInput("cannot read image " + path.string());
  Image img = Tensor::chw(3, static_cast<std::size_t>(bgr.rows), static_cast<std::size_t>(bgr.cols));
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(static_cast<std::size_t>(c), static_cast<std::size_t>(y),
               static_cast<std::size_t>(x)) = row[x][2 - c];
  }
  return img;
}

/// Rounds to 8 bits and writes in the format implied by the extension.
inline void write_image(const std::filesystem::path& path, const Image& img) {
  img.require_layout({Axis::Channel, Axis::Height, Axis::Width}, "write_image");
  const int h = static_cast<int>(img.dim(1)), w = static_cast<int>(img.dim(2));
  cv::Mat bgr(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = img.at(static_cast<std::size_t>(c), static_cast<std::size_t>(y),
                                static_cast<std::size_t>(x));
        row[x][2 - c] = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
  }
  if (!cv::imwrite(path.string(), bgr)) throw InvalidInput("cannot write image " + path.string());
}

}  // namespace siamsa

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace netpen {

/// Row-major grayscale raster, rows == height. Origin top-left.
using GrayImage = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Rgb = std::array<std::uint8_t, 3>;

/// Interleaved 8-bit RGB raster, origin top-left.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t* pixel(int u, int v) { return &data[(static_cast<std::size_t>(v) * width + u) * 3]; }
  const std::uint8_t* pixel(int u, int v) const {
    return &data[(static_cast<std::size_t>(v) * width + u) * 3];
  }
  Rgb at(int u, int v) const {
    const auto* p = pixel(u, v);
    return {p[0], p[1], p[2]};
  }

  bool operator==(const RgbImage&) const = default;
};

/// Rec.601 luma in [0, 255].
inline GrayImage to_gray(const RgbImage& img) {
  GrayImage g(img.height, img.width);
  for (int v = 0; v < img.height; ++v)
    for (int u = 0; u < img.width; ++u) {
      const auto* p = img.pixel(u, v);
      g(v, u) = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
    }
  return g;
}

/// Metric z-depth per pixel with a validity mask. Valid values are > 0.
struct DepthImage {
  using Values = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Values values;
  Mask valid;

  DepthImage() = default;
  DepthImage(int width, int height)
      : values(Values::Zero(height, width)), valid(Mask::Constant(height, width, false)) {}

  int width() const { return static_cast<int>(values.cols()); }
  int height() const { return static_cast<int>(values.rows()); }
  Eigen::Index valid_count() const { return valid.count(); }
};

}  // namespace netpen

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "unilight/error.hpp"

namespace unilight {

using Vec3 = Eigen::Vector3d;

constexpr double kPi = 3.14159265358979323846;

// Interleaved row-major float image, row 0 at the top.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.0f) : width(w), height(h), channels(c) {
    require(w > 0 && h > 0 && c > 0, "image dimensions must be positive");
    data.assign(static_cast<std::size_t>(w) * h * c, fill);
  }

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  float& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  float at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

  std::span<float> pixel(int x, int y) { return {data.data() + index(x, y), static_cast<std::size_t>(channels)}; }
  std::span<const float> pixel(int x, int y) const {
    return {data.data() + index(x, y), static_cast<std::size_t>(channels)};
  }

  bool empty() const { return data.empty(); }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

// Linear-radiance RGB panorama in latitude-longitude layout (width = 2 * height).
struct EquirectMap {
  Image image;

  EquirectMap() = default;
  explicit EquirectMap(Image img) : image(std::move(img)) {}
  EquirectMap(int w, int h, float fill = 0.0f) : image(w, h, 3, fill) {}

  int width() const { return image.width; }
  int height() const { return image.height; }
  float& at(int x, int y, int c) { return image.at(x, y, c); }
  float at(int x, int y, int c) const { return image.at(x, y, c); }
};

// Display-referred RGB in [0, 1].
struct LdrImage {
  Image image;
};

// ln(v + 1) / ln(i_max) per channel; `dropped` marks a dropout-zeroed copy.
struct LogImage {
  Image image;
  bool dropped = false;
};

// Per-pixel unit direction (x, y, z) stored as 3 channels.
struct DirectionMap {
  Image image;
  Vec3 at(int x, int y) const {
    auto p = image.pixel(x, y);
    return {p[0], p[1], p[2]};
  }
};

inline double luminance(double r, double g, double b) { return 0.2126 * r + 0.7152 * g + 0.0722 * b; }

inline double luminance(std::span<const float> rgb) { return luminance(rgb[0], rgb[1], rgb[2]); }

inline void validate_radiance(const Image& img) {
  require(img.channels == 3, "radiance image must have 3 channels");
  for (float v : img.data) {
    if (!(v >= 0.0f) || !std::isfinite(v)) throw InvalidArgument("radiance must be finite and non-negative");
  }
}

inline void validate_equirect(const EquirectMap& map) {
  require(map.width() >= 2 && map.height() >= 1, "equirect map dimensions too small");
  require(map.width() == 2 * map.height(), "equirect map must have a 2:1 aspect");
  validate_radiance(map.image);
}

}  // namespace unilight

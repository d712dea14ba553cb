#pragma once

// Lat-long panorama geometry. Conventions: y is up, longitude 0 faces +z and
// increases toward +x, polar angle 0 is straight up. Pixel centers sit at
// ((u + 0.5) / W, (v + 0.5) / H).

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "unilight/error.hpp"
#include "unilight/image.hpp"

namespace unilight {

struct CropSpec {
  double yaw = 0.0;  // degrees
  double fov = 90.0;  // horizontal, degrees
  int size = 512;
};

struct Crop {
  CropSpec spec;
  Image image;  // linear radiance, spec.size x spec.size
};

inline Vec3 direction_from_angles(double longitude, double polar) {
  const double s = std::sin(polar);
  return {s * std::sin(longitude), std::cos(polar), s * std::cos(longitude)};
}

// Returns (longitude in [-pi, pi], polar in [0, pi]).
inline std::array<double, 2> angles_from_direction(const Vec3& d) {
  const double polar = std::acos(std::clamp(d.y() / d.norm(), -1.0, 1.0));
  return {std::atan2(d.x(), d.z()), polar};
}

inline Vec3 pixel_direction(int width, int height, double u, double v) {
  const double longitude = ((u + 0.5) / width - 0.5) * 2.0 * kPi;
  const double polar = (v + 0.5) / height * kPi;
  return direction_from_angles(longitude, polar);
}

// Continuous pixel coordinates (pixel centers at integers) of a direction.
inline std::array<double, 2> direction_to_pixel(const Vec3& d, int width, int height) {
  const auto [longitude, polar] = angles_from_direction(d);
  return {(longitude / (2.0 * kPi) + 0.5) * width - 0.5, polar / kPi * height - 0.5};
}

inline DirectionMap direction_map(int width, int height) {
  require(width >= 2 && height >= 1, "direction map needs width >= 2 and height >= 1");
  DirectionMap out{Image(width, height, 3)};
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      const Vec3 d = pixel_direction(width, height, u, v);
      auto p = out.image.pixel(u, v);
      p[0] = static_cast<float>(d.x());
      p[1] = static_cast<float>(d.y());
      p[2] = static_cast<float>(d.z());
    }
  }
  return out;
}

inline Image solid_angle_weights(int width, int height) {
  require(width >= 1 && height >= 1, "weight map dimensions must be positive");
  Image out(width, height, 1);
  const double cell = (2.0 * kPi / width) * (kPi / height);
  for (int v = 0; v < height; ++v) {
    const float w = static_cast<float>(std::sin((v + 0.5) / height * kPi) * cell);
    for (int u = 0; u < width; ++u) out.at(u, v) = w;
  }
  return out;
}

// Bilinear lookup at continuous pixel coordinates; wraps in x, clamps in y.
inline std::array<float, 3> sample_bilinear(const Image& img, double x, double y) {
  const int w = img.width;
  const int h = img.height;
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const double tx = x - fx;
  const double ty = y - fy;
  int x0 = static_cast<int>(fx) % w;
  if (x0 < 0) x0 += w;
  const int x1 = (x0 + 1) % w;
  const int y0 = static_cast<int>(fy);
  const int y1 = std::min(y0 + 1, h - 1);
  std::array<float, 3> out{};
  for (int c = 0; c < 3; ++c) {
    const double top = (1.0 - tx) * img.at(x0, y0, c) + tx * img.at(x1, y0, c);
    const double bottom = (1.0 - tx) * img.at(x0, y1, c) + tx * img.at(x1, y1, c);
    out[c] = static_cast<float>((1.0 - ty) * top + ty * bottom);
  }
  return out;
}

inline std::array<float, 3> sample_direction(const EquirectMap& map, const Vec3& d) {
  const auto [x, y] = direction_to_pixel(d, map.width(), map.height());
  return sample_bilinear(map.image, x, y);
}

// Pinhole view at the given yaw with a level horizon.
inline Image extract_crop(const EquirectMap& map, const CropSpec& spec) {
  require(spec.size > 0, "crop size must be positive");
  require(spec.fov > 0.0 && spec.fov < 180.0, "crop fov must be in (0, 180)");
  const double yaw = spec.yaw * kPi / 180.0;
  const Vec3 forward(std::sin(yaw), 0.0, std::cos(yaw));
  const Vec3 right(std::cos(yaw), 0.0, -std::sin(yaw));
  const Vec3 up(0.0, 1.0, 0.0);
  const double half = std::tan(spec.fov * kPi / 360.0);

  Image out(spec.size, spec.size, 3);
  for (int j = 0; j < spec.size; ++j) {
    const double b = (1.0 - 2.0 * (j + 0.5) / spec.size) * half;
    for (int i = 0; i < spec.size; ++i) {
      const double a = (2.0 * (i + 0.5) / spec.size - 1.0) * half;
      const Vec3 d = (forward + a * right + b * up).normalized();
      const auto rgb = sample_direction(map, d);
      auto p = out.pixel(i, j);
      p[0] = rgb[0];
      p[1] = rgb[1];
      p[2] = rgb[2];
    }
  }
  return out;
}

inline std::vector<Crop> crops_from_panorama(const EquirectMap& map, double fov = 90.0, int size = 512) {
  validate_equirect(map);
  std::vector<Crop> crops;
  crops.reserve(9);
  for (int k = 0; k < 9; ++k) {
    CropSpec spec{40.0 * k, fov, size};
    crops.push_back({spec, extract_crop(map, spec)});
  }
  return crops;
}

// out(lambda) = in(lambda + angle): the rotated map's center shows what the
// original had at longitude `angle`.
inline EquirectMap rotate_yaw(const EquirectMap& map, double angle) {
  require(std::isfinite(angle), "rotation angle must be finite");
  const int w = map.width();
  const int h = map.height();
  double shift = std::fmod(angle / 360.0 * w, static_cast<double>(w));
  if (shift < 0.0) shift += w;
  const int whole = static_cast<int>(std::floor(shift));
  const double frac = shift - whole;

  EquirectMap out(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const int x0 = (u + whole) % w;
      const int x1 = (x0 + 1) % w;
      for (int c = 0; c < 3; ++c) {
        if (frac == 0.0) {
          out.at(u, v, c) = map.at(x0, v, c);
        } else {
          out.at(u, v, c) = static_cast<float>((1.0 - frac) * map.at(x0, v, c) + frac * map.at(x1, v, c));
        }
      }
    }
  }
  return out;
}

// Resize to width x width/2. Integer reductions use a box filter (keeps small
// bright sources from vanishing); anything else samples bilinearly.
inline EquirectMap resample_equirect(const EquirectMap& map, int width) {
  validate_equirect(map);
  require(width >= 2 && width % 2 == 0, "resample width must be even and >= 2");
  if (width == map.width()) return map;
  const int height = width / 2;
  EquirectMap out(width, height);
  if (map.width() % width == 0) {
    const int f = map.width() / width;
    const float inv = 1.0f / static_cast<float>(f * f);
    for (int v = 0; v < height; ++v)
      for (int u = 0; u < width; ++u)
        for (int c = 0; c < 3; ++c) {
          float s = 0.0f;
          for (int dy = 0; dy < f; ++dy)
            for (int dx = 0; dx < f; ++dx) s += map.at(u * f + dx, v * f + dy, c);
          out.at(u, v, c) = s * inv;
        }
    return out;
  }
  const double sx = static_cast<double>(map.width()) / width;
  const double sy = static_cast<double>(map.height()) / height;
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u) {
      const auto rgb = sample_bilinear(map.image, (u + 0.5) * sx - 0.5, (v + 0.5) * sy - 0.5);
      for (int c = 0; c < 3; ++c) out.at(u, v, c) = rgb[c];
    }
  return out;
}

}  // namespace unilight

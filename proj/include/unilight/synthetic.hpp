#pragma once

// Synthetic aligned samples whose lighting is fully set by a planted direction
// and color: an HDR panorama, a view of a diffuse sphere inside it, the matching
// irradiance view and a templated text description.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "unilight/encoder.hpp"
#include "unilight/envmap.hpp"
#include "unilight/learn.hpp"
#include "unilight/sh.hpp"
#include "unilight/tonemap.hpp"

namespace unilight {

struct NamedColor {
  const char* name;
  std::array<double, 3> rgb;
};

inline const std::array<NamedColor, 8>& light_palette() {
  static const std::array<NamedColor, 8> palette{{
      {"white", {1.0, 1.0, 1.0}},
      {"red", {1.0, 0.25, 0.2}},
      {"orange", {1.0, 0.6, 0.25}},
      {"yellow", {1.0, 0.95, 0.35}},
      {"green", {0.35, 1.0, 0.4}},
      {"cyan", {0.35, 0.95, 1.0}},
      {"blue", {0.3, 0.45, 1.0}},
      {"purple", {0.75, 0.35, 1.0}},
  }};
  return palette;
}

constexpr std::array<double, 3> kToyElevations{10.0, 35.0, 60.0};
constexpr int kToyAzimuths = 12;

struct LightingCondition {
  double azimuth = 0.0;    // degrees, 0 = +z (view center), 90 = +x (view right)
  double elevation = 0.0;  // degrees above the horizon
  int color = 0;           // index into light_palette()
};

inline Vec3 condition_direction(const LightingCondition& c) {
  return direction_from_angles(c.azimuth * kPi / 180.0, (90.0 - c.elevation) * kPi / 180.0);
}

inline std::string clock_position(double azimuth) {
  static const char* names[12] = {"twelve", "one", "two", "three", "four", "five",
                                  "six",    "seven", "eight", "nine", "ten", "eleven"};
  double a = std::fmod(azimuth, 360.0);
  if (a < 0.0) a += 360.0;
  return names[static_cast<int>(std::lround(a / 30.0)) % 12];
}

inline std::string elevation_phrase(double elevation) {
  if (elevation < 22.5) return "low near the horizon";
  if (elevation < 47.5) return "at mid height";
  return "high overhead";
}

inline int nearest_palette_color(const std::array<double, 3>& rgb) {
  const double peak = std::max({rgb[0], rgb[1], rgb[2], 1e-12});
  int best = 0;
  double best_d = 1e300;
  for (int i = 0; i < static_cast<int>(light_palette().size()); ++i) {
    double d = 0.0;
    for (int c = 0; c < 3; ++c) d += std::pow(rgb[c] / peak - light_palette()[i].rgb[c], 2.0);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

inline std::string describe_lighting(double azimuth, double elevation, int color) {
  return std::string("a ") + light_palette()[color].name + " light from " + clock_position(azimuth) +
         " o'clock, " + elevation_phrase(elevation) + ", casting " + light_palette()[color].name + " shading";
}

// Lambertian irradiance from SH radiance (band factors pi, 2pi/3, pi/4, 0).
inline std::array<double, 3> sh_irradiance(const ShCoefficients& sh, const Vec3& normal) {
  static constexpr std::array<double, 4> band{kPi, 2.0 * kPi / 3.0, kPi / 4.0, 0.0};
  const auto basis = sh_basis_unchecked(normal.x(), normal.y(), normal.z());
  std::array<double, 3> e{};
  for (int l = 0; l <= kShDegree; ++l)
    for (int i = l * l; i < (l + 1) * (l + 1); ++i)
      for (int c = 0; c < 3; ++c) e[c] += band[l] * sh(c, i) * basis[i];
  for (double& v : e) v = std::max(v, 0.0);
  return e;
}

// View at `yaw` of a unit-radius diffuse sphere filling `radius` of the frame.
// With `with_background`, the panorama shows behind the sphere and the sphere
// is shaded with `albedo`; otherwise pixels hold irradiance / pi, and the
// background is the irradiance of a surface facing the camera.
inline Image render_sphere_view(const EquirectMap& env, const ShCoefficients& sh, double yaw, int size, double albedo,
                                bool with_background, double radius = 0.6) {
  const double a = yaw * kPi / 180.0;
  const Vec3 forward(std::sin(a), 0.0, std::cos(a));
  const Vec3 right(std::cos(a), 0.0, -std::sin(a));
  const Vec3 up(0.0, 1.0, 0.0);
  Image out = with_background ? extract_crop(env, {yaw, 90.0, size}) : Image(size, size, 3);
  const auto facing = sh_irradiance(sh, -forward);
  for (int j = 0; j < size; ++j) {
    for (int i = 0; i < size; ++i) {
      const double px = (2.0 * (i + 0.5) / size - 1.0) / radius;
      const double py = (1.0 - 2.0 * (j + 0.5) / size) / radius;
      const double r2 = px * px + py * py;
      auto p = out.pixel(i, j);
      if (r2 >= 1.0) {
        if (!with_background)
          for (int c = 0; c < 3; ++c) p[c] = static_cast<float>(facing[c] / kPi);
        continue;
      }
      const Vec3 normal = (px * right + py * up - std::sqrt(1.0 - r2) * forward).normalized();
      const auto e = sh_irradiance(sh, normal);
      const double k = with_background ? albedo / kPi : 1.0 / kPi;
      for (int c = 0; c < 3; ++c) p[c] = static_cast<float>(k * e[c]);
    }
  }
  return out;
}

struct ToyConfig {
  int count = 256;
  int envmap_width = 64;
  int payload_size = 64;
  std::uint64_t seed = 0;
};

struct ToySample {
  std::string id;
  LightingCondition condition;
  EquirectMap envmap;
  LdrImage image;
  LdrImage irradiance;
  std::string text;
  ShCoefficients sh;
};

// Sky gradient plus a colored sun lobe exp(kappa (d.s - 1)).
inline EquirectMap render_toy_envmap(const LightingCondition& c, int width, double sun, double ambient) {
  const int height = width / 2;
  EquirectMap map(width, height);
  const Vec3 s = condition_direction(c);
  const auto& rgb = light_palette()[c.color].rgb;
  const double lum = 0.2126 * rgb[0] + 0.7152 * rgb[1] + 0.0722 * rgb[2];  // sun brightness independent of hue
  constexpr double kappa = 40.0;
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      const Vec3 d = pixel_direction(width, height, u, v);
      const double sky = d.y() > 0.0 ? ambient * (0.6 + 0.4 * d.y()) : 0.35 * ambient;
      const double lobe = sun * std::exp(kappa * (d.dot(s) - 1.0));
      const std::array<double, 3> tint{0.9, 0.95, 1.0};
      for (int ch = 0; ch < 3; ++ch) map.at(u, v, ch) = static_cast<float>(sky * tint[ch] + lobe * rgb[ch] / lum);
    }
  }
  return map;
}

inline std::vector<LightingCondition> toy_condition_grid() {
  std::vector<LightingCondition> grid;
  for (int a = 0; a < kToyAzimuths; ++a)
    for (double e : kToyElevations)
      for (int c = 0; c < static_cast<int>(light_palette().size()); ++c) grid.push_back({30.0 * a, e, c});
  return grid;
}

// Distinct conditions drawn without replacement from the 12 x 3 x 8 grid.
inline std::vector<ToySample> make_toy_samples(const ToyConfig& config) {
  auto grid = toy_condition_grid();
  require(config.count >= 1 && config.count <= static_cast<int>(grid.size()), "toy count must be in [1, 288]");
  require(config.envmap_width % 2 == 0 && config.envmap_width >= 32, "toy envmap width must be even and >= 32");
  std::mt19937_64 rng(mix_seed(config.seed, 0x70f));
  std::shuffle(grid.begin(), grid.end(), rng);
  std::vector<ToySample> out;
  out.reserve(static_cast<std::size_t>(config.count));
  for (int k = 0; k < config.count; ++k) {
    ToySample s;
    s.id = "toy" + std::to_string(k);
    s.condition = grid[static_cast<std::size_t>(k)];
    constexpr double sun = 30.0, ambient = 0.3, albedo = 0.7;
    s.envmap = render_toy_envmap(s.condition, config.envmap_width, sun, ambient);
    s.sh = fit_sh(s.envmap);
    s.image = reinhard_tonemap(render_sphere_view(s.envmap, s.sh, 0.0, config.payload_size, albedo, true));
    s.irradiance = reinhard_tonemap(render_sphere_view(s.envmap, s.sh, 0.0, config.payload_size, 1.0, false));
    s.text = describe_lighting(s.condition.azimuth, s.condition.elevation, s.condition.color);
    out.push_back(std::move(s));
  }
  return out;
}

inline FeatureSequence envmap_features(const EquirectMap& map, std::uint64_t backbone_seed, const EncoderConfig& config,
                                       const TonemapConfig& tone = {}, bool drop_log = false) {
  return stub_backbone(envmap_payload(map, tone, drop_log), Modality::envmap, backbone_seed, config);
}

inline TrainingSample featurize(const ToySample& s, int group, std::uint64_t backbone_seed, const EncoderConfig& config,
                                const TonemapConfig& tone = {}) {
  TrainingSample t;
  t.id = s.id;
  t.group = group;
  t.sh = s.sh;
  t.features[0] = envmap_features(s.envmap, backbone_seed, config, tone);
  t.features[1] = stub_backbone(s.image.image, Modality::image, backbone_seed, config);
  t.features[2] = stub_backbone(s.irradiance.image, Modality::irradiance, backbone_seed, config);
  t.features[3] = stub_backbone(s.text, backbone_seed, config);
  t.envmap_without_log = envmap_features(s.envmap, backbone_seed, config, tone, true);
  return t;
}

}  // namespace unilight

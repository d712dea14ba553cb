#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "unilight/envmap.hpp"
#include "unilight/error.hpp"
#include "unilight/image.hpp"

namespace unilight {

struct LightSource {
  Vec3 direction;
  int u = 0;
  int v = 0;
  double peak_radiance = 0.0;  // luminance at the brightest pixel
  double region_area = 0.0;    // steradians
};

struct LightDetectConfig {
  double tau0 = 4.0;
  int min_region_pixels = 1;
  int connectivity = 8;
};

namespace detail {

inline void validate(const LightDetectConfig& config) {
  require(config.tau0 > 0.0, "tau0 must be positive");
  require(config.min_region_pixels >= 1, "min_region_pixels must be >= 1");
  require(config.connectivity == 4 || config.connectivity == 8, "connectivity must be 4 or 8");
}

inline std::vector<double> luminance_plane(const EquirectMap& map) {
  std::vector<double> lum(static_cast<std::size_t>(map.width()) * map.height());
  for (int v = 0; v < map.height(); ++v)
    for (int u = 0; u < map.width(); ++u)
      lum[static_cast<std::size_t>(v) * map.width() + u] = luminance(map.image.pixel(u, v));
  return lum;
}

// tau0 * 2^(-step/2), exact on even steps.
inline double stop_threshold(double tau0, int step) {
  const double base = (step % 2 == 0) ? tau0 : tau0 / std::sqrt(2.0);
  return std::ldexp(base, -(step / 2));
}

struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace detail

inline double find_threshold(const EquirectMap& map, const LightDetectConfig& config = {}) {
  detail::validate(config);
  const auto lum = detail::luminance_plane(map);
  const auto positive = std::count_if(lum.begin(), lum.end(), [](double l) { return l > 0.0; });
  if (positive < config.min_region_pixels) throw NoLightError("map has no light above zero luminance");
  for (int step = 0;; ++step) {
    const double tau = detail::stop_threshold(config.tau0, step);
    const auto above = std::count_if(lum.begin(), lum.end(), [tau](double l) { return l > tau; });
    if (above >= config.min_region_pixels) return tau;
  }
}

// Connected components of {luminance > tau}; left and right borders touch.
// Components smaller than min_region_pixels are dropped.
inline std::vector<LightSource> detect_lights(const EquirectMap& map, const LightDetectConfig& config = {}) {
  const double tau = find_threshold(map, config);
  const int w = map.width();
  const int h = map.height();
  const auto lum = detail::luminance_plane(map);
  auto id = [w](int u, int v) { return v * w + u; };

  detail::DisjointSets sets(lum.size());
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (!(lum[id(u, v)] > tau)) continue;
      // Backward neighbours in raster order, plus the wrap partner on column 0.
      const int left = (u + w - 1) % w;
      if (lum[id(left, v)] > tau) sets.unite(id(u, v), id(left, v));
      if (v > 0) {
        if (lum[id(u, v - 1)] > tau) sets.unite(id(u, v), id(u, v - 1));
        if (config.connectivity == 8) {
          const int right = (u + 1) % w;
          if (lum[id(left, v - 1)] > tau) sets.unite(id(u, v), id(left, v - 1));
          if (lum[id(right, v - 1)] > tau) sets.unite(id(u, v), id(right, v - 1));
        }
      }
    }
  }

  const Image weights = solid_angle_weights(w, h);
  struct Region {
    int peak = -1;
    int pixels = 0;
    double area = 0.0;
  };
  std::vector<Region> regions(lum.size());
  std::vector<int> roots;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const int p = id(u, v);
      if (!(lum[p] > tau)) continue;
      Region& r = regions[sets.find(p)];
      if (r.peak < 0) roots.push_back(sets.find(p));
      if (r.peak < 0 || lum[p] > lum[r.peak]) r.peak = p;
      r.area += weights.at(u, v);
      ++r.pixels;
    }
  }

  std::vector<LightSource> lights;
  for (int root : roots) {
    const Region& r = regions[root];
    if (r.pixels < config.min_region_pixels) continue;
    const int u = r.peak % w;
    const int v = r.peak / w;
    lights.push_back({pixel_direction(w, h, u, v), u, v, lum[r.peak], r.area});
  }
  std::stable_sort(lights.begin(), lights.end(),
                   [](const LightSource& a, const LightSource& b) { return a.peak_radiance > b.peak_radiance; });
  return lights;
}

}  // namespace unilight

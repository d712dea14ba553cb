#pragma once

// Seeded generators and independent reference implementations for tests.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "unilight/image.hpp"

namespace testing_support {

using unilight::EquirectMap;
using unilight::Image;
using unilight::Vec3;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }

  Vec3 unit_vector() {
    Vec3 v;
    do {
      v = Vec3(normal(), normal(), normal());
    } while (v.norm() < 1e-6);
    return v.normalized();
  }

  Image image(int w, int h, int c, double lo = 0.0, double hi = 1.0) {
    Image img(w, h, c);
    for (float& v : img.data) v = static_cast<float>(uniform(lo, hi));
    return img;
  }

  // Low-frequency positive map: a few random cosine lobes plus a floor.
  EquirectMap smooth_map(int w, int h) {
    struct Lobe {
      Vec3 axis;
      double power;
      std::array<double, 3> rgb;
    };
    std::vector<Lobe> lobes;
    for (int k = 0; k < 3; ++k) lobes.push_back({unit_vector(), uniform(1.0, 4.0), {uniform(), uniform(), uniform()}});
    EquirectMap m(w, h);
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        const double lon = ((u + 0.5) / w - 0.5) * 2.0 * M_PI;
        const double pol = (v + 0.5) / h * M_PI;
        const Vec3 d(std::sin(pol) * std::sin(lon), std::cos(pol), std::sin(pol) * std::cos(lon));
        for (int c = 0; c < 3; ++c) {
          double s = 0.2;
          for (const auto& l : lobes) s += l.rgb[c] * std::pow(std::max(0.0, d.dot(l.axis)), l.power);
          m.at(u, v, c) = static_cast<float>(s);
        }
      }
    return m;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// Real SH from associated Legendre functions with the polar axis on z and no
// Condon-Shortley phase (std::assoc_legendre omits it).
inline double reference_sh(int l, int m, const Vec3& d) {
  const double theta = std::acos(std::clamp(d.z(), -1.0, 1.0));
  const double phi = std::atan2(d.y(), d.x());
  const int am = std::abs(m);
  double fact_ratio = 1.0;  // (l - |m|)! / (l + |m|)!
  for (int k = l - am + 1; k <= l + am; ++k) fact_ratio /= k;
  const double k_lm = std::sqrt((2.0 * l + 1.0) / (4.0 * M_PI) * fact_ratio);
  const double p = std::assoc_legendre(static_cast<unsigned>(l), static_cast<unsigned>(am), std::cos(theta));
  if (m == 0) return k_lm * p;
  if (m > 0) return std::sqrt(2.0) * k_lm * std::cos(am * phi) * p;
  return std::sqrt(2.0) * k_lm * std::sin(am * phi) * p;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("unilight_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_support

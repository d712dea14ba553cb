#pragma once

// Real orthonormal spherical harmonics up to degree 3, no Condon-Shortley
// phase. Index i = l(l+1) + m. The table is the usual graphics one evaluated
// on the raw (x, y, z) of a direction, so Y(1,-1) ~ y, Y(1,0) ~ z, Y(1,1) ~ x.

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "unilight/envmap.hpp"
#include "unilight/error.hpp"
#include "unilight/image.hpp"

namespace unilight {

constexpr int kShDegree = 3;
constexpr int kShCount = (kShDegree + 1) * (kShDegree + 1);

constexpr int sh_index(int l, int m) { return l * (l + 1) + m; }

struct ShCoefficients {
  std::array<std::array<double, kShCount>, 3> channels{};

  double& operator()(int channel, int i) { return channels[channel][i]; }
  double operator()(int channel, int i) const { return channels[channel][i]; }

  double norm() const {
    double s = 0.0;
    for (const auto& ch : channels)
      for (double c : ch) s += c * c;
    return std::sqrt(s);
  }
};

template <class T>
std::array<T, kShCount> sh_basis_unchecked(T x, T y, T z) {
  using std::sqrt;
  const T pi = T(kPi);
  std::array<T, kShCount> b{};
  b[0] = T(0.5) * sqrt(T(1) / pi);

  const T c1 = sqrt(T(3) / (T(4) * pi));
  b[1] = c1 * y;
  b[2] = c1 * z;
  b[3] = c1 * x;

  const T c2a = T(0.5) * sqrt(T(15) / pi);
  b[4] = c2a * x * y;
  b[5] = c2a * y * z;
  b[6] = T(0.25) * sqrt(T(5) / pi) * (T(3) * z * z - T(1));
  b[7] = c2a * x * z;
  b[8] = T(0.25) * sqrt(T(15) / pi) * (x * x - y * y);

  b[9] = T(0.25) * sqrt(T(35) / (T(2) * pi)) * y * (T(3) * x * x - y * y);
  b[10] = T(0.5) * sqrt(T(105) / pi) * x * y * z;
  b[11] = T(0.25) * sqrt(T(21) / (T(2) * pi)) * y * (T(5) * z * z - T(1));
  b[12] = T(0.25) * sqrt(T(7) / pi) * z * (T(5) * z * z - T(3));
  b[13] = T(0.25) * sqrt(T(21) / (T(2) * pi)) * x * (T(5) * z * z - T(1));
  b[14] = T(0.25) * sqrt(T(105) / pi) * z * (x * x - y * y);
  b[15] = T(0.25) * sqrt(T(35) / (T(2) * pi)) * x * (x * x - T(3) * y * y);
  return b;
}

inline std::array<double, kShCount> sh_basis(const Vec3& d) {
  if (std::abs(d.norm() - 1.0) > 1e-6) throw InvalidArgument("sh_basis needs a unit direction");
  return sh_basis_unchecked(d.x(), d.y(), d.z());
}

// Riemann projection with solid-angle weights.
inline ShCoefficients fit_sh(const EquirectMap& map) {
  require(map.width() >= 2 && map.height() >= 1, "fit_sh: degenerate map dimensions");
  const int w = map.width();
  const int h = map.height();
  const double cell = (2.0 * kPi / w) * (kPi / h);
  ShCoefficients out;
  for (int v = 0; v < h; ++v) {
    const double polar = (v + 0.5) / h * kPi;
    const double weight = std::sin(polar) * cell;
    std::array<std::array<double, kShCount>, 3> row{};
    for (int u = 0; u < w; ++u) {
      const Vec3 d = pixel_direction(w, h, u, v);
      const auto basis = sh_basis_unchecked(d.x(), d.y(), d.z());
      for (int c = 0; c < 3; ++c) {
        const double value = map.at(u, v, c);
        if (value == 0.0) continue;
        for (int i = 0; i < kShCount; ++i) row[c][i] += value * basis[i];
      }
    }
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < kShCount; ++i) out.channels[c][i] += row[c][i] * weight;
  }
  return out;
}

inline double sh_evaluate(const ShCoefficients& coeffs, int channel, const Vec3& d) {
  const auto basis = sh_basis_unchecked(d.x(), d.y(), d.z());
  double s = 0.0;
  for (int i = 0; i < kShCount; ++i) s += coeffs(channel, i) * basis[i];
  return s;
}

// Values may be negative; exporters clamp.
inline EquirectMap render_sh(const ShCoefficients& coeffs, int width, int height) {
  require(width >= 2 && height >= 1, "render_sh: degenerate map dimensions");
  EquirectMap out(width, height);
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      const Vec3 d = pixel_direction(width, height, u, v);
      const auto basis = sh_basis_unchecked(d.x(), d.y(), d.z());
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int i = 0; i < kShCount; ++i) s += coeffs(c, i) * basis[i];
        out.at(u, v, c) = static_cast<float>(s);
      }
    }
  }
  return out;
}

inline Vec3 dominant_direction(const ShCoefficients& coeffs) {
  auto lum = [&](int i) { return luminance(coeffs(0, i), coeffs(1, i), coeffs(2, i)); };
  const Vec3 g(lum(sh_index(1, 1)), lum(sh_index(1, -1)), lum(sh_index(1, 0)));
  const double n = g.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw IsotropicLightError("degree-1 SH vector is zero");
  return g / n;
}

// Rotation about +y taking longitude lambda to lambda + angle.
inline Eigen::Matrix3d yaw_matrix(double angle_degrees) {
  const double a = angle_degrees * kPi / 180.0;
  Eigen::Matrix3d r;
  r << std::cos(a), 0.0, std::sin(a), 0.0, 1.0, 0.0, -std::sin(a), 0.0, std::cos(a);
  return r;
}

// Per-degree matrices M_l with Y_l(R d) = M_l Y_l(d). Solved by least squares
// over a fixed spread of directions; the identity is exact for polynomials of
// degree l, so the solve is exact to rounding.
inline std::array<Eigen::MatrixXd, kShDegree + 1> sh_rotation_blocks(const Eigen::Matrix3d& rotation) {
  constexpr int samples = 48;
  std::vector<Vec3> dirs;
  dirs.reserve(samples);
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < samples; ++k) {
    const double y = 1.0 - 2.0 * (k + 0.5) / samples;
    const double r = std::sqrt(1.0 - y * y);
    dirs.emplace_back(r * std::cos(golden * k), y, r * std::sin(golden * k));
  }
  std::array<Eigen::MatrixXd, kShDegree + 1> blocks;
  for (int l = 0; l <= kShDegree; ++l) {
    const int n = 2 * l + 1;
    Eigen::MatrixXd a(samples, n);
    Eigen::MatrixXd b(samples, n);
    for (int k = 0; k < samples; ++k) {
      const auto y0 = sh_basis_unchecked(dirs[k].x(), dirs[k].y(), dirs[k].z());
      const Vec3 rd = rotation * dirs[k];
      const auto y1 = sh_basis_unchecked(rd.x(), rd.y(), rd.z());
      for (int j = 0; j < n; ++j) {
        a(k, j) = y0[l * l + j];
        b(k, j) = y1[l * l + j];
      }
    }
    // a * M^T = b
    blocks[l] = a.colPivHouseholderQr().solve(b).transpose();
  }
  return blocks;
}

// render_sh(rotate_sh_yaw(c, a)) == rotate_yaw(render_sh(c), a).
inline ShCoefficients rotate_sh_yaw(const ShCoefficients& coeffs, double angle_degrees) {
  if (angle_degrees == 0.0) return coeffs;
  const auto blocks = sh_rotation_blocks(yaw_matrix(angle_degrees));
  ShCoefficients out;
  for (int c = 0; c < 3; ++c) {
    for (int l = 0; l <= kShDegree; ++l) {
      const int n = 2 * l + 1;
      Eigen::VectorXd in(n);
      for (int j = 0; j < n; ++j) in[j] = coeffs(c, l * l + j);
      // g(d) = f(R d) = sum_i c_i Y_i(R d) = sum_j (M^T c)_j Y_j(d)
      const Eigen::VectorXd rotated = blocks[l].transpose() * in;
      for (int j = 0; j < n; ++j) out(c, l * l + j) = rotated[j];
    }
  }
  return out;
}

}  // namespace unilight

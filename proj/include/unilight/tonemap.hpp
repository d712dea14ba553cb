#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "unilight/error.hpp"
#include "unilight/image.hpp"

namespace unilight {

struct TonemapConfig {
  double key = 0.35;
  double gamma = 2.2;
  double i_max = 1000.0;
};

// Global Reinhard operator with log-average auto exposure, then gamma.
inline LdrImage reinhard_tonemap(const Image& image, double key = 0.35, double gamma = 2.2) {
  validate_radiance(image);
  require(key > 0.0, "tonemap key must be positive");
  require(gamma > 0.0, "tonemap gamma must be positive");
  constexpr double delta = 1e-6;

  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  double log_sum = 0.0;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) log_sum += std::log(delta + luminance(image.pixel(x, y)));
  const double log_average = std::exp(log_sum / static_cast<double>(n));

  LdrImage out{Image(image.width, image.height, 3)};
  const double inv_gamma = 1.0 / gamma;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      auto in = image.pixel(x, y);
      const double lum = luminance(in);
      const double scaled = key / log_average * lum;
      const double display = scaled / (1.0 + scaled);
      const double ratio = display / std::max(lum, delta);
      auto o = out.image.pixel(x, y);
      for (int c = 0; c < 3; ++c)
        o[c] = static_cast<float>(std::pow(std::clamp(in[c] * ratio, 0.0, 1.0), inv_gamma));
    }
  }
  return out;
}

inline LogImage log_encode(const Image& image, double i_max = 1000.0) {
  require(i_max > 1.0, "log encoding needs i_max > 1");
  validate_radiance(image);
  LogImage out{Image(image.width, image.height, image.channels), false};
  const double denom = std::log(i_max);
  for (std::size_t i = 0; i < image.data.size(); ++i) {
    const double v = std::min(static_cast<double>(image.data[i]), i_max - 1.0);
    out.image.data[i] = static_cast<float>(std::log1p(v) / denom);
  }
  return out;
}

// Uniform [0, 1) from a single engine draw.
inline double uniform_unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Whole-image dropout: all channels go to zero together.
inline LogImage drop_log_channels(const LogImage& log, double probability, std::mt19937_64& rng) {
  require(probability >= 0.0 && probability <= 1.0, "dropout probability must be in [0, 1]");
  if (uniform_unit(rng) < probability) {
    LogImage out{log.image, true};
    std::fill(out.image.data.begin(), out.image.data.end(), 0.0f);
    return out;
  }
  return log;
}

}  // namespace unilight

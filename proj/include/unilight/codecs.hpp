#pragma once

// Image codecs: PFM, Radiance RGBE (.hdr, with new-style RLE scanlines) and
// 8-bit PNG through libpng. All writers are atomic (temp file + rename).

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <png.h>

#include "unilight/error.hpp"
#include "unilight/image.hpp"

namespace unilight {

namespace fs = std::filesystem;

inline std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void atomic_write(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline void atomic_write(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  atomic_write(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

namespace detail {

inline std::uint32_t float_bits(float f) { return std::bit_cast<std::uint32_t>(f); }

inline void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32_le(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 | std::uint32_t{p[3]} << 24;
}

inline std::uint32_t get_u32_be(const std::uint8_t* p) {
  return std::uint32_t{p[3]} | std::uint32_t{p[2]} << 8 | std::uint32_t{p[1]} << 16 | std::uint32_t{p[0]} << 24;
}

// Cursor over a byte buffer for whitespace-separated ASCII headers.
struct HeaderReader {
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;

  std::string token() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) ++pos;
    if (start == pos) throw CorruptFile("unexpected end of header", pos);
    return {bytes.begin() + static_cast<std::ptrdiff_t>(start), bytes.begin() + static_cast<std::ptrdiff_t>(pos)};
  }

  std::string line() {
    const std::size_t start = pos;
    while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    if (pos >= bytes.size()) throw CorruptFile("unterminated header line", start);
    std::string s(bytes.begin() + static_cast<std::ptrdiff_t>(start), bytes.begin() + static_cast<std::ptrdiff_t>(pos));
    ++pos;
    return s;
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// PFM. Rows are stored bottom to top; a negative scale means little-endian.

inline std::string encode_pfm(const Image& img) {
  require(img.channels == 3 || img.channels == 1, "PFM holds 1 or 3 channels");
  std::string out = (img.channels == 3 ? "PF\n" : "Pf\n") + std::to_string(img.width) + " " +
                    std::to_string(img.height) + "\n-1.0\n";
  out.reserve(out.size() + img.data.size() * 4);
  for (int y = img.height - 1; y >= 0; --y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) detail::put_u32_le(out, detail::float_bits(img.at(x, y, c)));
  return out;
}

inline Image decode_pfm(const std::vector<std::uint8_t>& bytes) {
  detail::HeaderReader r{bytes};
  const std::string magic = r.token();
  if (magic != "PF" && magic != "Pf") throw FormatError("not a PFM file");
  const int channels = magic == "PF" ? 3 : 1;
  int w = 0, h = 0;
  double scale = 0.0;
  try {
    w = std::stoi(r.token());
    h = std::stoi(r.token());
    scale = std::stod(r.token());
  } catch (const std::logic_error&) {
    throw CorruptFile("malformed PFM header", r.pos);
  }
  if (w <= 0 || h <= 0 || scale == 0.0) throw CorruptFile("invalid PFM dimensions or scale", r.pos);
  ++r.pos;  // single whitespace byte before the raster
  const bool little = scale < 0.0;
  Image img(w, h, channels);
  const std::size_t need = img.data.size() * 4;
  if (bytes.size() < r.pos + need) throw CorruptFile("truncated PFM raster", bytes.size());
  const std::uint8_t* p = bytes.data() + r.pos;
  for (int y = h - 1; y >= 0; --y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c, p += 4)
        img.at(x, y, c) = std::bit_cast<float>(little ? detail::get_u32_le(p) : detail::get_u32_be(p));
  return img;
}

// ---------------------------------------------------------------------------
// Radiance RGBE.

inline std::array<std::uint8_t, 4> float_to_rgbe(float r, float g, float b) {
  const float v = std::max({r, g, b});
  if (v < 1e-32f) return {0, 0, 0, 0};
  int e = 0;
  const float scale = std::frexp(v, &e) * 256.0f / v;
  return {static_cast<std::uint8_t>(r * scale), static_cast<std::uint8_t>(g * scale),
          static_cast<std::uint8_t>(b * scale), static_cast<std::uint8_t>(e + 128)};
}

// (mantissa + 0.5) / 256 * 2^(exponent - 128); exponent 0 is black.
inline std::array<float, 3> rgbe_to_float(const std::uint8_t* rgbe) {
  if (rgbe[3] == 0) return {0.0f, 0.0f, 0.0f};
  const float f = std::ldexp(1.0f, static_cast<int>(rgbe[3]) - (128 + 8));
  return {(rgbe[0] + 0.5f) * f, (rgbe[1] + 0.5f) * f, (rgbe[2] + 0.5f) * f};
}

namespace detail {

// One component plane of a scanline, reference run-length scheme: runs of at
// least 4 equal bytes become (128 + count, value), the rest literal blocks.
inline void rle_component(std::string& out, const std::uint8_t* data, int n) {
  constexpr int min_run = 4;
  int cur = 0;
  while (cur < n) {
    int beg_run = cur;
    int run_count = 0;
    int old_run_count = 0;
    while (run_count < min_run && beg_run < n) {
      beg_run += run_count;
      old_run_count = run_count;
      run_count = 1;
      while (beg_run + run_count < n && run_count < 127 && data[beg_run] == data[beg_run + run_count]) ++run_count;
    }
    if (old_run_count > 1 && old_run_count == beg_run - cur) {
      out.push_back(static_cast<char>(128 + old_run_count));
      out.push_back(static_cast<char>(data[cur]));
      cur = beg_run;
    }
    while (cur < beg_run) {
      const int count = std::min(beg_run - cur, 128);
      out.push_back(static_cast<char>(count));
      out.append(reinterpret_cast<const char*>(data + cur), static_cast<std::size_t>(count));
      cur += count;
    }
    if (run_count >= min_run) {
      out.push_back(static_cast<char>(128 + run_count));
      out.push_back(static_cast<char>(data[beg_run]));
      cur += run_count;
    }
  }
}

}  // namespace detail

inline std::string encode_rgbe(const Image& img) {
  require(img.channels == 3, "RGBE holds 3 channels");
  std::string out = "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y " + std::to_string(img.height) + " +X " +
                    std::to_string(img.width) + "\n";
  const int w = img.width;
  const bool rle = w >= 8 && w < 32768;
  std::vector<std::uint8_t> planes(static_cast<std::size_t>(w) * 4);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < w; ++x) {
      auto p = img.pixel(x, y);
      const auto e = float_to_rgbe(p[0], p[1], p[2]);
      for (int c = 0; c < 4; ++c) planes[static_cast<std::size_t>(c) * w + x] = e[c];
    }
    if (!rle) {
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 4; ++c) out.push_back(static_cast<char>(planes[static_cast<std::size_t>(c) * w + x]));
      continue;
    }
    out.push_back(2);
    out.push_back(2);
    out.push_back(static_cast<char>(w >> 8));
    out.push_back(static_cast<char>(w & 0xff));
    for (int c = 0; c < 4; ++c) detail::rle_component(out, planes.data() + static_cast<std::size_t>(c) * w, w);
  }
  return out;
}

inline Image decode_rgbe(const std::vector<std::uint8_t>& bytes) {
  detail::HeaderReader r{bytes};
  const std::string magic = r.line();
  if (magic.rfind("#?", 0) != 0) throw FormatError("not a Radiance RGBE file");
  for (;;) {
    const std::string line = r.line();
    if (line.empty()) break;
    if (line.rfind("FORMAT=", 0) == 0 && line != "FORMAT=32-bit_rle_rgbe")
      throw FormatError("unsupported RGBE pixel format: " + line);
  }
  const std::size_t res_pos = r.pos;
  const std::string res = r.line();
  int w = 0, h = 0;
  char ys[3] = {}, xs[3] = {};
  if (std::sscanf(res.c_str(), "%2s %d %2s %d", ys, &h, xs, &w) != 4 || std::string(ys) != "-Y" ||
      std::string(xs) != "+X" || w <= 0 || h <= 0)
    throw CorruptFile("unsupported RGBE resolution line", res_pos);

  Image img(w, h, 3);
  std::vector<std::uint8_t> planes(static_cast<std::size_t>(w) * 4);
  std::size_t pos = r.pos;
  auto need = [&](std::size_t n) {
    if (pos + n > bytes.size()) throw CorruptFile("truncated RGBE scanline", pos);
  };
  for (int y = 0; y < h; ++y) {
    need(4);
    const bool rle = w >= 8 && w < 32768 && bytes[pos] == 2 && bytes[pos + 1] == 2 && (bytes[pos + 2] & 0x80) == 0;
    if (rle) {
      if (((bytes[pos + 2] << 8) | bytes[pos + 3]) != w) throw CorruptFile("RGBE scanline width mismatch", pos);
      pos += 4;
      for (int c = 0; c < 4; ++c) {
        std::uint8_t* plane = planes.data() + static_cast<std::size_t>(c) * w;
        int x = 0;
        while (x < w) {
          need(1);
          int count = bytes[pos++];
          if (count > 128) {
            count -= 128;
            if (x + count > w) throw CorruptFile("RGBE run overflows scanline", pos - 1);
            need(1);
            std::fill(plane + x, plane + x + count, bytes[pos++]);
          } else {
            if (count == 0 || x + count > w) throw CorruptFile("bad RGBE literal count", pos - 1);
            need(static_cast<std::size_t>(count));
            std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                      bytes.begin() + static_cast<std::ptrdiff_t>(pos + count), plane + x);
            pos += static_cast<std::size_t>(count);
          }
          x += count;
        }
      }
      for (int x = 0; x < w; ++x) {
        const std::uint8_t e[4] = {planes[x], planes[static_cast<std::size_t>(w) + x],
                                   planes[static_cast<std::size_t>(2 * w) + x], planes[static_cast<std::size_t>(3 * w) + x]};
        const auto rgb = rgbe_to_float(e);
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = rgb[c];
      }
    } else {
      need(static_cast<std::size_t>(w) * 4);
      for (int x = 0; x < w; ++x, pos += 4) {
        const auto rgb = rgbe_to_float(bytes.data() + pos);
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = rgb[c];
      }
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// Radiance map loading by magic.

inline Image load_radiance_image(const fs::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == 'F' || bytes[1] == 'f')) {
    Image img = decode_pfm(bytes);
    if (img.channels == 3) return img;
    Image rgb(img.width, img.height, 3);
    for (std::size_t i = 0; i < img.data.size(); ++i)
      for (int c = 0; c < 3; ++c) rgb.data[i * 3 + c] = img.data[i];
    return rgb;
  }
  if (bytes.size() >= 2 && bytes[0] == '#' && bytes[1] == '?') return decode_rgbe(bytes);
  throw FormatError("unknown radiance file magic in " + path.string());
}

inline EquirectMap load_radiance_map(const fs::path& path) { return EquirectMap(load_radiance_image(path)); }

// Chooses the codec from the extension (.pfm or .hdr); negatives clamp to 0.
inline void save_radiance_image(const Image& img, const fs::path& path) {
  Image clamped = img;
  for (float& v : clamped.data) v = std::isfinite(v) ? std::max(v, 0.0f) : 0.0f;
  const std::string ext = path.extension().string();
  if (ext == ".pfm") {
    atomic_write(path, encode_pfm(clamped));
  } else if (ext == ".hdr" || ext == ".rgbe") {
    atomic_write(path, encode_rgbe(clamped));
  } else {
    throw InvalidArgument("radiance output must end in .pfm or .hdr: " + path.string());
  }
}

// ---------------------------------------------------------------------------
// PNG, 8 bits per channel, round(v * 255).

inline std::vector<std::uint8_t> quantize_8bit(const Image& img) {
  std::vector<std::uint8_t> out(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i)
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.data[i], 0.0f, 1.0f) * 255.0f));
  return out;
}

inline void save_ldr_image(const LdrImage& ldr, const fs::path& path) {
  const Image& img = ldr.image;
  require(img.channels == 3 || img.channels == 1, "PNG export needs 1 or 3 channels");
  for (float v : img.data)
    if (!(v >= 0.0f && v <= 1.0f)) throw InvalidArgument("LDR values must be in [0, 1]");
  const auto pixels = quantize_8bit(img);
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr))
    throw std::runtime_error(std::string("PNG sizing failed: ") + image.message);
  std::vector<std::uint8_t> buffer(size);
  if (!png_image_write_to_memory(&image, buffer.data(), &size, 0, pixels.data(), 0, nullptr))
    throw std::runtime_error(std::string("PNG encode failed: ") + image.message);
  buffer.resize(size);
  atomic_write(path, buffer);
}

inline LdrImage load_ldr_image(const fs::path& path) {
  const auto bytes = read_file(path);
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw FormatError("not a readable PNG: " + path.string());
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw FormatError(std::string("PNG decode failed: ") + image.message);
  }
  LdrImage out{Image(static_cast<int>(image.width), static_cast<int>(image.height), 3)};
  for (std::size_t i = 0; i < pixels.size(); ++i) out.image.data[i] = pixels[i] / 255.0f;
  return out;
}

}  // namespace unilight

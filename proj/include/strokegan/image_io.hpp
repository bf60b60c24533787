#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "strokegan/tensor.hpp"

namespace strokegan {

/// One glyph of one font. Pixels are 1×H×W in [-1, 1]; background is +1
/// (white) and ink is −1.
struct GlyphImage {
  Tensor<float> pixels;
  char32_t codepoint = 0;
  std::string font_id;

  std::size_t height() const { return pixels.dim(1); }
  std::size_t width() const { return pixels.dim(2); }
};

inline bool in_unit_range(std::span<const float> values) {
  return std::all_of(values.begin(), values.end(), [](float v) { return v >= -1.0f && v <= 1.0f; });
}

inline std::uint8_t to_byte(float v) {
  const float clamped = std::clamp(v, -1.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround((clamped + 1.0f) * 127.5f));
}

inline float from_byte(std::uint8_t b) { return static_cast<float>(b) / 127.5f - 1.0f; }

namespace detail {
struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace detail

/// Writes 8-bit grayscale rows (row-major, `width` bytes per row).
inline void write_png_gray(const std::filesystem::path& path, std::size_t width, std::size_t height,
                           const std::vector<std::uint8_t>& bytes) {
  detail::FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::IoError, "libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::IoError, "libpng write failed: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(bytes.data() + y * width));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> bytes;
};

/// Reads any PNG and converts it to 8-bit grayscale.
inline GrayImage read_png_gray(const std::filesystem::path& path) {
  detail::FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw Error(ErrorKind::MissingFile, path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::IoError, "libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::IoError, "not a readable PNG: " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);
  GrayImage img;
  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  img.bytes.resize(img.width * img.height);
  std::vector<png_bytep> rows(img.height);
  for (std::size_t y = 0; y < img.height; ++y) rows[y] = img.bytes.data() + y * img.width;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

/// Saves a 1×H×W image in [-1, 1] as 8-bit grayscale.
inline void save_glyph_png(const std::filesystem::path& path, const Tensor<float>& pixels) {
  const std::size_t h = pixels.dim(pixels.rank() - 2), w = pixels.dim(pixels.rank() - 1);
  std::vector<std::uint8_t> bytes(h * w);
  for (std::size_t i = 0; i < h * w; ++i) bytes[i] = to_byte(pixels[i]);
  write_png_gray(path, w, h, bytes);
}

inline Tensor<float> load_glyph_png(const std::filesystem::path& path) {
  const GrayImage img = read_png_gray(path);
  Tensor<float> t({1, img.height, img.width});
  for (std::size_t i = 0; i < img.bytes.size(); ++i) t[i] = from_byte(img.bytes[i]);
  return t;
}

/// Side-by-side grid: one row per sample, one column per image set.
inline void save_image_grid(const std::filesystem::path& path, const std::vector<std::vector<Tensor<float>>>& rows,
                            std::size_t gap = 2) {
  if (rows.empty() || rows.front().empty()) return;
  const std::size_t h = rows.front().front().dim(1), w = rows.front().front().dim(2);
  const std::size_t cols = rows.front().size();
  const std::size_t width = cols * w + (cols + 1) * gap, height = rows.size() * h + (rows.size() + 1) * gap;
  std::vector<std::uint8_t> bytes(width * height, 128);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size() && c < cols; ++c) {
      const Tensor<float>& img = rows[r][c];
      const std::size_t oy = gap + r * (h + gap), ox = gap + c * (w + gap);
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) bytes[(oy + y) * width + ox + x] = to_byte(img[y * w + x]);
      }
    }
  }
  write_png_gray(path, width, height, bytes);
}

}  // namespace strokegan

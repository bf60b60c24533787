#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#if defined(__GNUC__)
#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Wunused-function"
#pragma GCC diagnostic ignored "-Wsign-compare"
#pragma GCC diagnostic ignored "-Wunused-parameter"
#pragma GCC diagnostic ignored "-Wmissing-field-initializers"
#pragma GCC diagnostic ignored "-Wshadow"
#pragma GCC diagnostic ignored "-Wconversion"
#endif
#ifndef STB_TRUETYPE_IMPLEMENTATION
#define STBTT_STATIC
#define STB_TRUETYPE_IMPLEMENTATION
#endif
#include "stb_truetype.h"
#if defined(__GNUC__)
#pragma GCC diagnostic pop
#endif

#include "strokegan/image_io.hpp"
#include "strokegan/stroke_codec.hpp"

namespace strokegan {

inline constexpr std::size_t kDefaultResolution = 128;

/// Fraction of the image side the font's em square is scaled to.
inline constexpr float kEmFill = 0.8f;

struct RasterResult {
  std::vector<GlyphImage> images;
  std::vector<char32_t> missing;  // not in the font, or an empty outline
};

/// Renders each requested codepoint centered on a resolution×resolution canvas
/// at one font-wide scale. Deterministic: the same codepoint always yields the
/// same pixels.
inline RasterResult rasterize_font(const std::filesystem::path& font_file, std::span<const char32_t> codepoints,
                                   std::size_t resolution = kDefaultResolution, std::string font_id = {}) {
  if (resolution < 32) throw Error(ErrorKind::InvalidConfig, "resolution must be >= 32");
  std::ifstream in(font_file, std::ios::binary);
  if (!in) throw Error(ErrorKind::UnrenderableFont, "cannot open " + font_file.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  stbtt_fontinfo font;
  if (bytes.size() < 12 || stbtt_GetNumberOfFonts(bytes.data()) < 1) {
    throw Error(ErrorKind::UnrenderableFont, font_file.string() + " is not a TrueType/OpenType font");
  }
  const int offset = stbtt_GetFontOffsetForIndex(bytes.data(), 0);
  if (offset < 0 || !stbtt_InitFont(&font, bytes.data(), offset)) {
    throw Error(ErrorKind::UnrenderableFont, font_file.string());
  }
  if (font_id.empty()) font_id = font_file.stem().string();

  const float scale = stbtt_ScaleForMappingEmToPixels(&font, kEmFill * static_cast<float>(resolution));
  const int res = static_cast<int>(resolution);
  RasterResult result;
  for (char32_t cp : codepoints) {
    const int glyph = stbtt_FindGlyphIndex(&font, static_cast<int>(cp));
    if (glyph == 0 || stbtt_IsGlyphEmpty(&font, glyph)) {
      result.missing.push_back(cp);
      continue;
    }
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    stbtt_GetGlyphBitmapBox(&font, glyph, scale, scale, &x0, &y0, &x1, &y1);
    const int gw = x1 - x0, gh = y1 - y0;
    if (gw <= 0 || gh <= 0) {
      result.missing.push_back(cp);
      continue;
    }
    std::vector<unsigned char> coverage(static_cast<std::size_t>(gw * gh));
    stbtt_MakeGlyphBitmap(&font, coverage.data(), gw, gh, gw, scale, scale, glyph);

    GlyphImage img{Tensor<float>({1, resolution, resolution}, 1.0f), cp, font_id};
    const int ox = (res - gw) / 2, oy = (res - gh) / 2;
    for (int y = 0; y < gh; ++y) {
      const int ty = oy + y;
      if (ty < 0 || ty >= res) continue;
      for (int x = 0; x < gw; ++x) {
        const int tx = ox + x;
        if (tx < 0 || tx >= res) continue;
        const float ink = static_cast<float>(coverage[static_cast<std::size_t>(y * gw + x)]) / 255.0f;
        img.pixels[static_cast<std::size_t>(ty * res + tx)] = 1.0f - 2.0f * ink;
      }
    }
    result.images.push_back(std::move(img));
  }
  if (result.images.empty()) throw Error(ErrorKind::EmptyGlyphSet, font_file.string() + " renders none of the requested characters");
  return result;
}

}  // namespace strokegan

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "strokegan/dataset.hpp"

namespace strokegan {

// Procedural stand-in for a real font pair. A pseudo-glyph is 2–6 strokes drawn
// from 32 stroke types (8 directions × short/long × with/without a hook),
// placed on a coarse grid. The target font is a fixed deterministic transform
// of the source: one-pixel ink thickening followed by a small horizontal shear.

inline constexpr char32_t kSyntheticFirstCodepoint = 0x4E00;
inline constexpr double kSyntheticShear = 0.1;

struct SyntheticFontPair {
  std::vector<GlyphImage> source;
  std::vector<GlyphImage> target;
  StrokeTable strokes;

  GlyphDataset dataset() const {
    GlyphDataset d;
    d.resolution = source.empty() ? 0 : source.front().height();
    for (const auto& g : source) d.source.emplace(g.codepoint, g.pixels);
    for (const auto& g : target) d.target.emplace(g.codepoint, g.pixels);
    d.strokes = strokes;
    return d;
  }
};

namespace detail {

struct Segment {
  double x0, y0, x1, y1;
};

inline double segment_distance(const Segment& s, double px, double py) {
  const double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((px - s.x0) * dx + (py - s.y0) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double cx = s.x0 + t * dx - px, cy = s.y0 + t * dy - py;
  return std::sqrt(cx * cx + cy * cy);
}

/// Segments of stroke type `id` (1..32) anchored at (ax, ay), in units of the
/// image side.
inline std::vector<Segment> stroke_segments(int id, double ax, double ay) {
  const int t = id - 1;
  const int direction = t % 8;
  const bool long_stroke = (t / 8) % 2 == 1;
  const bool hook = t / 16 == 1;
  const double angle = direction * 3.14159265358979323846 / 4.0;
  const double len = long_stroke ? 0.22 : 0.12;
  Segment main{ax, ay, ax + len * std::cos(angle), ay + len * std::sin(angle)};
  std::vector<Segment> out{main};
  if (hook) {
    const double ha = angle + 3.14159265358979323846 * 0.75;
    out.push_back({main.x1, main.y1, main.x1 + 0.06 * std::cos(ha), main.y1 + 0.06 * std::sin(ha)});
  }
  return out;
}

}  // namespace detail

/// Renders stroke ids placed at the given anchors; anti-aliased ink of
/// width ≈ resolution/32.
inline Tensor<float> render_strokes(const std::vector<int>& ids, const std::vector<std::array<double, 2>>& anchors,
                                    std::size_t resolution) {
  std::vector<detail::Segment> segs;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (auto s : detail::stroke_segments(ids[i], anchors[i][0], anchors[i][1])) {
      const double r = static_cast<double>(resolution);
      segs.push_back({s.x0 * r, s.y0 * r, s.x1 * r, s.y1 * r});
    }
  }
  const double half_width = std::max(1.0, static_cast<double>(resolution) / 64.0);
  Tensor<float> img({1, resolution, resolution}, 1.0f);
  for (std::size_t y = 0; y < resolution; ++y) {
    for (std::size_t x = 0; x < resolution; ++x) {
      double ink = 0.0;
      for (const auto& s : segs) {
        const double d = detail::segment_distance(s, x + 0.5, y + 0.5);
        ink = std::max(ink, std::clamp(half_width + 0.5 - d, 0.0, 1.0));
      }
      img[y * resolution + x] = static_cast<float>(1.0 - 2.0 * ink);
    }
  }
  return img;
}

/// Thickening (3×3 minimum filter, ink is low) then shear x' = x + s·(y − c)
/// with nearest-pixel resampling; exposed so tests can check pairs exactly.
inline Tensor<float> synthetic_target_transform(const Tensor<float>& source) {
  const std::size_t h = source.dim(1), w = source.dim(2);
  Tensor<float> thick({1, h, w}, 1.0f);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      float v = 1.0f;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const long yy = static_cast<long>(y) + dy, xx = static_cast<long>(x) + dx;
          if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(w)) continue;
          v = std::min(v, source[static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx)]);
        }
      }
      thick[y * w + x] = v;
    }
  }
  Tensor<float> out({1, h, w}, 1.0f);
  const double center = (static_cast<double>(h) - 1.0) / 2.0;
  for (std::size_t y = 0; y < h; ++y) {
    const long shift = std::lround(kSyntheticShear * (static_cast<double>(y) - center));
    for (std::size_t x = 0; x < w; ++x) {
      const long sx = static_cast<long>(x) - shift;
      if (sx >= 0 && sx < static_cast<long>(w)) out[y * w + x] = thick[y * w + static_cast<std::size_t>(sx)];
    }
  }
  return out;
}

/// `n_chars` pseudo-glyphs at codepoints U+4E00.., their stroke table, and
/// the transformed target glyphs. Bit-identical for equal (n_chars, seed,
/// resolution).
inline SyntheticFontPair make_synthetic_font_pair(std::size_t n_chars, std::uint64_t seed,
                                                  std::size_t resolution = 64) {
  if (n_chars < 10) throw Error(ErrorKind::TooFewCharacters, "synthetic font pair needs >= 10 characters");
  if (resolution < 32 || resolution % 4 != 0) throw Error(ErrorKind::InvalidConfig, "resolution must be a multiple of 4, >= 32");
  std::mt19937_64 rng(mix_seed(seed, 7));
  std::uniform_int_distribution<int> stroke_count(2, 6);
  std::uniform_int_distribution<int> stroke_type(1, kStrokeTypes);
  std::uniform_int_distribution<int> grid(0, 4);
  SyntheticFontPair pair;
  pair.strokes.version = "synthetic-" + std::to_string(seed);
  pair.strokes.source_path = "<synthetic>";
  for (std::size_t i = 0; i < n_chars; ++i) {
    const char32_t cp = kSyntheticFirstCodepoint + static_cast<char32_t>(i);
    const int k = stroke_count(rng);
    std::vector<int> ids;
    std::vector<std::array<double, 2>> anchors;
    for (int s = 0; s < k; ++s) {
      ids.push_back(stroke_type(rng));
      // Anchors on a 5×5 grid over [0.3, 0.7] so every stroke stays inside.
      anchors.push_back({0.3 + 0.1 * grid(rng), 0.3 + 0.1 * grid(rng)});
    }
    Tensor<float> src = render_strokes(ids, anchors, resolution);
    Tensor<float> tgt = synthetic_target_transform(src);
    pair.source.push_back({std::move(src), cp, "synthetic-source"});
    pair.target.push_back({std::move(tgt), cp, "synthetic-target"});
    pair.strokes.entries.emplace(cp, std::move(ids));
  }
  return pair;
}

}  // namespace strokegan

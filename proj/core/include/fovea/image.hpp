#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "fovea/geometry.hpp"

namespace fovea {

/// Planar (channel-major) float raster with values in [0, 1].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  ImageDims dims() const noexcept { return {width, height, channels}; }
  std::size_t plane_size() const noexcept { return static_cast<std::size_t>(height) * width; }

  float& at(int c, int y, int x) noexcept { return data[(c * plane_size()) + static_cast<std::size_t>(y) * width + x]; }
  float at(int c, int y, int x) const noexcept {
    return data[(c * plane_size()) + static_cast<std::size_t>(y) * width + x];
  }

  bool operator==(const Image&) const = default;
};

struct Patch {
  Image pixels;
  Rect source_rect;
};

using Rgb = std::array<float, 3>;

/// Crops `rect` and resamples it bilinearly to `fixed_size`. Output pixel centers
/// map to source coordinates (i + 0.5) * scale - 0.5, clamped to the crop, so no
/// pixel outside the rect contributes.
Patch extract_glimpse(const Image& image, const Rect& rect, Size2 fixed_size);

struct OverlayStyle {
  Rgb color{1.0f, 0.0f, 0.0f};
};

/// Returns a copy with 1-pixel outlines of each rect, painted in list order.
/// `styles` is either empty (red for all), of size 1, or one entry per rect.
Image render_overlay(const Image& image, std::span<const Rect> rects, std::span<const OverlayStyle> styles = {});

/// Paints a small plus-shaped marker (arm length 2) centered on `p`, clipped to the image.
void draw_marker(Image& image, FixationPoint p, Rgb color);

/// Binary PPM (P6, maxval 255). Grayscale images are replicated to RGB.
void write_ppm(const std::filesystem::path& path, const Image& image);

/// Binary PGM (P5, maxval 255) of a single plane; values are scaled by 1/max.
void write_pgm(const std::filesystem::path& path, std::span<const double> plane, int width, int height);

}  // namespace fovea

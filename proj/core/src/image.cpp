#include "fovea/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fovea/error.hpp"

namespace fovea {

namespace {

struct Tap {
  int lo;
  int hi;
  double w;  // weight of `hi`
};

std::vector<Tap> resample_taps(int src_len, int dst_len) {
  std::vector<Tap> taps(static_cast<std::size_t>(dst_len));
  const double scale = static_cast<double>(src_len) / dst_len;
  for (int i = 0; i < dst_len; ++i) {
    double s = (i + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src_len - 1));
    const int lo = static_cast<int>(std::floor(s));
    const int hi = std::min(lo + 1, src_len - 1);
    taps[static_cast<std::size_t>(i)] = {lo, hi, s - lo};
  }
  return taps;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void open_for_write(std::ofstream& out, const std::filesystem::path& path) {
  out.open(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
}

}  // namespace

Patch extract_glimpse(const Image& image, const Rect& rect, Size2 fixed_size) {
  if (!rect.valid_in(image.dims())) throw ShapeError("glimpse rect outside the image");
  if (fixed_size.width < 1 || fixed_size.height < 1) throw ConfigError("fixed glimpse size must be >= 1");

  const auto xs = resample_taps(rect.width(), fixed_size.width);
  const auto ys = resample_taps(rect.height(), fixed_size.height);

  Patch patch{Image(image.channels, fixed_size.height, fixed_size.width), rect};
  for (int c = 0; c < image.channels; ++c) {
    for (int oy = 0; oy < fixed_size.height; ++oy) {
      const Tap& ty = ys[static_cast<std::size_t>(oy)];
      const int r0 = rect.y0 + ty.lo;
      const int r1 = rect.y0 + ty.hi;
      for (int ox = 0; ox < fixed_size.width; ++ox) {
        const Tap& tx = xs[static_cast<std::size_t>(ox)];
        const int c0 = rect.x0 + tx.lo;
        const int c1 = rect.x0 + tx.hi;
        const double top = (1.0 - tx.w) * image.at(c, r0, c0) + tx.w * image.at(c, r0, c1);
        const double bottom = (1.0 - tx.w) * image.at(c, r1, c0) + tx.w * image.at(c, r1, c1);
        patch.pixels.at(c, oy, ox) = static_cast<float>((1.0 - ty.w) * top + ty.w * bottom);
      }
    }
  }
  return patch;
}

Image render_overlay(const Image& image, std::span<const Rect> rects, std::span<const OverlayStyle> styles) {
  if (!styles.empty() && styles.size() != 1 && styles.size() != rects.size()) {
    throw ShapeError("overlay styles must be empty, a single entry, or one per rect");
  }
  Image out = image;
  for (std::size_t i = 0; i < rects.size(); ++i) {
    const Rect& r = rects[i];
    if (!r.valid_in(image.dims())) throw ShapeError("overlay rect outside the image");
    const Rgb color = styles.empty() ? OverlayStyle{}.color : styles[styles.size() == 1 ? 0 : i].color;
    auto paint = [&](int y, int x) {
      for (int c = 0; c < out.channels; ++c) out.at(c, y, x) = color[static_cast<std::size_t>(std::min(c, 2))];
    };
    for (int x = r.x0; x < r.x1; ++x) {
      paint(r.y0, x);
      paint(r.y1 - 1, x);
    }
    for (int y = r.y0; y < r.y1; ++y) {
      paint(y, r.x0);
      paint(y, r.x1 - 1);
    }
  }
  return out;
}

void draw_marker(Image& image, FixationPoint p, Rgb color) {
  for (int d = -2; d <= 2; ++d) {
    for (auto [x, y] : {std::pair{p.x + d, p.y}, std::pair{p.x, p.y + d}}) {
      if (x < 0 || y < 0 || x >= image.width || y >= image.height) continue;
      for (int c = 0; c < image.channels; ++c) image.at(c, y, x) = color[static_cast<std::size_t>(std::min(c, 2))];
    }
  }
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out;
  open_for_write(out, path);
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<std::uint8_t> row(static_cast<std::size_t>(image.width) * 3);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        row[static_cast<std::size_t>(x) * 3 + c] = to_byte(image.at(std::min(c, image.channels - 1), y, x));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw Error("failed writing " + path.string());
}

void write_pgm(const std::filesystem::path& path, std::span<const double> plane, int width, int height) {
  if (plane.size() != static_cast<std::size_t>(width) * height) throw ShapeError("pgm plane size mismatch");
  const double peak = plane.empty() ? 0.0 : *std::max_element(plane.begin(), plane.end());
  std::ofstream out;
  open_for_write(out, path);
  out << "P5\n" << width << ' ' << height << "\n255\n";
  for (double v : plane) {
    const std::uint8_t b = to_byte(peak > 0.0 ? v / peak : 0.0);
    out.put(static_cast<char>(b));
  }
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace fovea

#include "fovea/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fovea/error.hpp"
#include "fovea/rng.hpp"
#include "text_util.hpp"

namespace fovea {

namespace {

using detail::parse_double;
using detail::parse_int;
using detail::split;

template <typename E, std::size_t N>
E parse_enum(std::string_view key, std::string_view v, const std::array<E, N>& all) {
  for (E e : all) {
    if (to_string(e) == v) return e;
  }
  throw ConfigError("key '" + std::string(key) + "': unknown value '" + std::string(v) + "'");
}

constexpr std::array kShapes = {ShapeKind::Box, ShapeKind::Ellipse, ShapeKind::Plus, ShapeKind::Frame};
constexpr std::array kBackgrounds = {BackgroundFamily::Flat, BackgroundFamily::Gradient, BackgroundFamily::Noise};
constexpr std::array kPalettes = {Palette::Warm, Palette::Cool};

Size2 parse_size(std::string_view key, std::string_view v) {
  auto parts = split(v, 'x');
  if (parts.size() != 2) throw ConfigError("key '" + std::string(key) + "': expected WxH");
  return {static_cast<int>(parse_int(key, parts[0])), static_cast<int>(parse_int(key, parts[1]))};
}

std::string size_str(Size2 s) { return std::to_string(s.width) + "x" + std::to_string(s.height); }

Rgb hsv(double h_deg, double s, double v) {
  h_deg = std::fmod(std::fmod(h_deg, 360.0) + 360.0, 360.0);
  const double c = v * s;
  const double hp = h_deg / 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else { r = c; b = x; }
  const double m = v - c;
  return {static_cast<float>(r + m), static_cast<float>(g + m), static_cast<float>(b + m)};
}

Rgb object_color(Rng& rng, Palette palette) {
  const double hue = palette == Palette::Warm ? uniform(rng, -40.0, 60.0) : uniform(rng, 150.0, 250.0);
  return hsv(hue, uniform(rng, 0.45, 0.8), uniform(rng, 0.8, 1.0));
}

Rgb background_color(Rng& rng) { return hsv(uniform(rng, 0.0, 360.0), uniform(rng, 0.0, 0.4), uniform(rng, 0.02, 0.12)); }

Rgb marker_color(int k, int count) { return hsv(15.0 + 360.0 * k / count, 1.0, 1.0); }

void paint_background(Image& img, Rng& rng, BackgroundFamily family) {
  const Rgb base = background_color(rng);
  switch (family) {
    case BackgroundFamily::Flat:
      for (int c = 0; c < img.channels; ++c)
        std::fill_n(img.data.begin() + static_cast<std::ptrdiff_t>(c * img.plane_size()), img.plane_size(), base[c]);
      break;
    case BackgroundFamily::Gradient: {
      const Rgb other = background_color(rng);
      const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      const double dx = std::cos(angle), dy = std::sin(angle);
      // Project pixel centers on the direction and normalize to [0,1].
      const double span = std::fabs(dx) * img.width + std::fabs(dy) * img.height;
      const double offset = std::min(0.0, dx * img.width) + std::min(0.0, dy * img.height);
      for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
          const double t = ((x + 0.5) * dx + (y + 0.5) * dy - offset) / span;
          for (int c = 0; c < img.channels; ++c) img.at(c, y, x) = static_cast<float>((1 - t) * base[c] + t * other[c]);
        }
      }
      break;
    }
    case BackgroundFamily::Noise: {
      const double amp = uniform(rng, 0.06, 0.14);
      for (int c = 0; c < img.channels; ++c) {
        for (int y = 0; y < img.height; ++y) {
          for (int x = 0; x < img.width; ++x) {
            img.at(c, y, x) = static_cast<float>(std::clamp(base[c] + uniform(rng, -amp, amp), 0.0, 1.0));
          }
        }
      }
      break;
    }
  }
}

bool in_shape(ShapeKind shape, const Rect& box, int x, int y) {
  const int w = box.width(), h = box.height();
  switch (shape) {
    case ShapeKind::Box: return true;
    case ShapeKind::Ellipse: {
      const double nx = (x + 0.5 - (box.x0 + w / 2.0)) / (w / 2.0);
      const double ny = (y + 0.5 - (box.y0 + h / 2.0)) / (h / 2.0);
      return nx * nx + ny * ny <= 1.0;
    }
    case ShapeKind::Plus: {
      const bool hbar = y >= box.y0 + h / 3 && y < box.y0 + h - h / 3;
      const bool vbar = x >= box.x0 + w / 3 && x < box.x0 + w - w / 3;
      return hbar || vbar;
    }
    case ShapeKind::Frame: {
      const int t = std::max(3, std::min(w, h) / 5);
      return x < box.x0 + t || x >= box.x1 - t || y < box.y0 + t || y >= box.y1 - t;
    }
  }
  return false;
}

float pattern_shade(int pattern, const Rect& box, int x, int y) {
  constexpr int kPeriod = 8;
  const int lx = (x - box.x0) / (kPeriod / 2), ly = (y - box.y0) / (kPeriod / 2);
  switch (pattern) {
    case 1: return ly % 2 ? 0.65f : 1.0f;
    case 2: return lx % 2 ? 0.65f : 1.0f;
    case 3: return (lx + ly) % 2 ? 0.65f : 1.0f;
    default: return 1.0f;
  }
}

int band_width(const Rect& box) { return std::clamp(std::min(box.width(), box.height()) / 5, 4, 16); }

// Clockwise arc-length position of an outline pixel, measured from the top-left
// corner along the edge nearest to it.
int outline_position(const Rect& box, int x, int y) {
  const int w = box.width(), h = box.height();
  const int dt = y - box.y0, dr = box.x1 - 1 - x, db = box.y1 - 1 - y, dl = x - box.x0;
  const int d = std::min({dt, dr, db, dl});
  if (d == dt) return x - box.x0;
  if (d == dr) return w + (y - box.y0);
  if (d == db) return w + h + (box.x1 - 1 - x);
  return 2 * w + h + (box.y1 - 1 - y);
}

// Band k covers arc [k/K, (k+1)/K) of the outline, `t` pixels deep. Returns -1
// for pixels outside the ring.
int band_of(const Rect& box, int t, int count, int x, int y) {
  const int d = std::min({y - box.y0, box.x1 - 1 - x, box.y1 - 1 - y, x - box.x0});
  if (d >= t) return -1;
  const long perimeter = 2L * (box.width() + box.height());
  return static_cast<int>(outline_position(box, x, y) * static_cast<long>(count) / perimeter);
}

// Midpoint of band k's arc, moved half a band inward.
FixationPoint band_anchor(const Rect& box, int t, int k, int count) {
  const int w = box.width(), h = box.height();
  const double perimeter = 2.0 * (w + h);
  const double pos = perimeter * (k + 0.5) / count;
  const int in = t / 2;
  auto at = [](double v) { return static_cast<int>(std::floor(v)); };
  FixationPoint p;
  if (pos < w) p = {box.x0 + at(pos), box.y0 + in};
  else if (pos < w + h) p = {box.x1 - 1 - in, box.y0 + at(pos - w)};
  else if (pos < 2.0 * w + h) p = {box.x1 - 1 - at(pos - w - h), box.y1 - 1 - in};
  else p = {box.x0 + in, box.y1 - 1 - at(pos - 2.0 * w - h)};
  p.x = std::clamp(p.x, box.x0 + in, box.x1 - 1 - in);
  p.y = std::clamp(p.y, box.y0 + in, box.y1 - 1 - in);
  return p;
}

}  // namespace

std::string_view to_string(ShapeKind s) noexcept {
  switch (s) {
    case ShapeKind::Box: return "box";
    case ShapeKind::Ellipse: return "ellipse";
    case ShapeKind::Plus: return "plus";
    case ShapeKind::Frame: return "frame";
  }
  return "?";
}

std::string_view to_string(BackgroundFamily b) noexcept {
  switch (b) {
    case BackgroundFamily::Flat: return "flat";
    case BackgroundFamily::Gradient: return "gradient";
    case BackgroundFamily::Noise: return "noise";
  }
  return "?";
}

std::string_view to_string(Palette p) noexcept { return p == Palette::Warm ? "warm" : "cool"; }

void validate(const SceneDistribution& d) {
  validate(d.dims);
  if (d.attribute_count < 2) throw ConfigError("attribute_count must be >= 2");
  if (d.class_count < 2) throw ConfigError("class_count must be >= 2");
  if (d.shapes.empty()) throw ConfigError("at least one shape is required");
  if (d.backgrounds.empty()) throw ConfigError("at least one background family is required");
  if (d.class_count > static_cast<int>(d.shapes.size()) * kNumPatterns) {
    throw ConfigError("class_count exceeds shapes x fill patterns (" +
                      std::to_string(d.shapes.size() * kNumPatterns) + ")");
  }
  if (!d.attribute_priors.empty()) {
    if (static_cast<int>(d.attribute_priors.size()) != d.attribute_count) {
      throw ConfigError("attribute_priors must have attribute_count entries");
    }
    for (double p : d.attribute_priors) {
      if (!(p > 0.0 && p <= 1.0)) throw ConfigError("attribute priors must lie in (0, 1]");
    }
  }
  if (d.margin < 0) throw ConfigError("margin must be >= 0");
  if (d.min_size.width < 8 || d.min_size.height < 8) throw ConfigError("object size must be at least 8x8");
  if (d.min_size.width > d.max_size.width || d.min_size.height > d.max_size.height) {
    throw ConfigError("object size range is empty");
  }
  if (d.max_size.width > d.dims.width - 2 * d.margin || d.max_size.height > d.dims.height - 2 * d.margin) {
    throw ConfigError("object size range does not fit inside the image minus the placement margin");
  }
}

std::map<std::string, std::string> to_entries(const SceneDistribution& d) {
  auto fmt_enum = [](auto e) { return std::string(to_string(e)); };
  std::map<std::string, std::string> out;
  out["width"] = std::to_string(d.dims.width);
  out["height"] = std::to_string(d.dims.height);
  out["channels"] = std::to_string(d.dims.channels);
  out["shapes"] = detail::join(d.shapes, fmt_enum);
  out["min_size"] = size_str(d.min_size);
  out["max_size"] = size_str(d.max_size);
  out["attribute_count"] = std::to_string(d.attribute_count);
  out["class_count"] = std::to_string(d.class_count);
  out["attribute_priors"] = detail::join(d.attribute_priors, detail::format_double);
  out["backgrounds"] = detail::join(d.backgrounds, fmt_enum);
  out["palette"] = std::string(to_string(d.palette));
  out["margin"] = std::to_string(d.margin);
  return out;
}

SceneDistribution distribution_from_entries(const std::map<std::string, std::string>& entries) {
  SceneDistribution d;
  for (const auto& [key, value] : entries) {
    if (key == "width") d.dims.width = static_cast<int>(parse_int(key, value));
    else if (key == "height") d.dims.height = static_cast<int>(parse_int(key, value));
    else if (key == "channels") d.dims.channels = static_cast<int>(parse_int(key, value));
    else if (key == "shapes") {
      d.shapes.clear();
      for (const auto& s : split(value, ',')) d.shapes.push_back(parse_enum(key, s, kShapes));
    } else if (key == "min_size") d.min_size = parse_size(key, value);
    else if (key == "max_size") d.max_size = parse_size(key, value);
    else if (key == "attribute_count") d.attribute_count = static_cast<int>(parse_int(key, value));
    else if (key == "class_count") d.class_count = static_cast<int>(parse_int(key, value));
    else if (key == "attribute_priors") {
      d.attribute_priors.clear();
      if (!detail::trim(value).empty()) {
        for (const auto& s : split(value, ',')) d.attribute_priors.push_back(parse_double(key, s));
      }
    } else if (key == "backgrounds") {
      d.backgrounds.clear();
      for (const auto& s : split(value, ',')) d.backgrounds.push_back(parse_enum(key, s, kBackgrounds));
    } else if (key == "palette") d.palette = parse_enum(key, detail::trim(value), kPalettes);
    else if (key == "margin") d.margin = static_cast<int>(parse_int(key, value));
    else throw ConfigError("unknown scene key '" + key + "'");
  }
  return d;
}

int Scene::present_count() const noexcept {
  return static_cast<int>(std::count(attributes.begin(), attributes.end(), std::uint8_t{1}));
}

ShapeKind shape_of_class(int class_id, const SceneDistribution& dist) {
  return dist.shapes[static_cast<std::size_t>(class_id) % dist.shapes.size()];
}

int pattern_of_class(int class_id, const SceneDistribution& dist) {
  return (class_id / static_cast<int>(dist.shapes.size())) % kNumPatterns;
}

Scene generate_scene(std::uint64_t seed, const SceneDistribution& dist) {
  validate(dist);
  Rng rng = make_stream({seed, 0x5ce9e});
  const int W = dist.dims.width, H = dist.dims.height, K = dist.attribute_count;

  Scene scene;
  scene.seed = seed;
  scene.class_id = uniform_int(rng, 0, dist.class_count - 1);
  const int w = uniform_int(rng, dist.min_size.width, dist.max_size.width);
  const int h = uniform_int(rng, dist.min_size.height, dist.max_size.height);
  const int x0 = uniform_int(rng, dist.margin, W - dist.margin - w);
  const int y0 = uniform_int(rng, dist.margin, H - dist.margin - h);
  const Rect box{x0, y0, x0 + w, y0 + h};

  // At least one attribute must be present so a fully visible object has unit similarity.
  scene.attributes.assign(static_cast<std::size_t>(K), 0);
  do {
    for (int k = 0; k < K; ++k) scene.attributes[static_cast<std::size_t>(k)] = uniform01(rng) < dist.prior(k) ? 1 : 0;
  } while (scene.present_count() == 0);

  const Rgb color = object_color(rng, dist.palette);
  const auto family = dist.backgrounds[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(dist.backgrounds.size()) - 1))];

  scene.image = Image(dist.dims.channels, H, W);
  paint_background(scene.image, rng, family);

  const ShapeKind shape = shape_of_class(scene.class_id, dist);
  const int pattern = pattern_of_class(scene.class_id, dist);
  Rect tight{W, H, 0, 0};
  auto mark = [&](int x, int y) {
    tight.x0 = std::min(tight.x0, x);
    tight.y0 = std::min(tight.y0, y);
    tight.x1 = std::max(tight.x1, x + 1);
    tight.y1 = std::max(tight.y1, y + 1);
  };
  auto put = [&](int x, int y, const Rgb& rgb) {
    for (int c = 0; c < scene.image.channels; ++c) {
      scene.image.at(c, y, x) = scene.image.channels == 1 ? (rgb[0] + rgb[1] + rgb[2]) / 3.0f : rgb[c];
    }
  };

  for (int y = box.y0; y < box.y1; ++y) {
    for (int x = box.x0; x < box.x1; ++x) {
      if (!in_shape(shape, box, x, y)) continue;
      const float s = pattern_shade(pattern, box, x, y);
      put(x, y, {color[0] * s, color[1] * s, color[2] * s});
      mark(x, y);
    }
  }

  const int t = band_width(box);
  scene.anchors.assign(static_cast<std::size_t>(K), kAbsentAnchor);
  for (int y = box.y0; y < box.y1; ++y) {
    for (int x = box.x0; x < box.x1; ++x) {
      const int k = band_of(box, t, K, x, y);
      if (k < 0 || !scene.attributes[static_cast<std::size_t>(k)]) continue;
      put(x, y, marker_color(k, K));
      mark(x, y);
    }
  }
  for (int k = 0; k < K; ++k) {
    if (scene.attributes[static_cast<std::size_t>(k)]) scene.anchors[static_cast<std::size_t>(k)] = band_anchor(box, t, k, K);
  }
  scene.bbox_gt = tight;
  return scene;
}

std::vector<Scene> generate_scenes(std::uint64_t first_seed, int count, const SceneDistribution& dist) {
  std::vector<Scene> out;
  out.reserve(static_cast<std::size_t>(std::max(0, count)));
  for (int i = 0; i < count; ++i) out.push_back(generate_scene(first_seed + static_cast<std::uint64_t>(i), dist));
  return out;
}

}  // namespace fovea

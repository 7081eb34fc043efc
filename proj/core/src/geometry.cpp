#include "fovea/geometry.hpp"

#include <algorithm>
#include <string>

#include "fovea/error.hpp"

namespace fovea {

void validate(const ImageDims& dims) {
  if (dims.width < 8 || dims.height < 8) {
    throw ConfigError("image dims must be at least 8x8, got " + std::to_string(dims.width) + "x" +
                      std::to_string(dims.height));
  }
  if (dims.channels != 1 && dims.channels != 3) {
    throw ConfigError("image channels must be 1 or 3, got " + std::to_string(dims.channels));
  }
}

void validate(const GlimpseConfig& cfg) {
  if (cfg.num_glimpses < 1) throw ConfigError("num_glimpses must be >= 1");
  if (cfg.init_size.width < 1 || cfg.init_size.height < 1) throw ConfigError("init glimpse size must be >= 1");
  if (cfg.fixed_size.width < 1 || cfg.fixed_size.height < 1) throw ConfigError("fixed glimpse size must be >= 1");
  if (cfg.step.width < 1 || cfg.step.height < 1) throw ConfigError("glimpse step must be >= 1");
}

Action action_from_index(int index) {
  if (index < 0 || index >= kNumActions) throw ShapeError("action index out of range: " + std::to_string(index));
  return static_cast<Action>(index);
}

std::string_view to_string(Action a) noexcept {
  switch (a) {
    case Action::ExpandXNeg: return "expand_x_neg";
    case Action::ExpandXPos: return "expand_x_pos";
    case Action::ExpandYNeg: return "expand_y_neg";
    case Action::ExpandYPos: return "expand_y_pos";
    case Action::Stop: return "stop";
  }
  return "unknown";
}

std::optional<Action> parse_action(std::string_view name) noexcept {
  for (Action a : kAllActions) {
    if (to_string(a) == name) return a;
  }
  return std::nullopt;
}

namespace {

// Places an interval of `length` centered on `center` inside [0, extent).
std::pair<int, int> centered_span(int center, int length, int extent) {
  if (length >= extent) return {0, extent};
  int lo = center - length / 2;
  lo = std::clamp(lo, 0, extent - length);
  return {lo, lo + length};
}

}  // namespace

Rect initial_glimpse(FixationPoint fixation, Size2 init_size, const ImageDims& dims) {
  validate(dims);
  if (init_size.width < 1 || init_size.height < 1) throw ConfigError("init glimpse size must be >= 1");
  if (fixation.x < 0 || fixation.x >= dims.width || fixation.y < 0 || fixation.y >= dims.height) {
    throw ConfigError("fixation (" + std::to_string(fixation.x) + "," + std::to_string(fixation.y) +
                      ") outside the image");
  }
  auto [x0, x1] = centered_span(fixation.x, init_size.width, dims.width);
  auto [y0, y1] = centered_span(fixation.y, init_size.height, dims.height);
  return Rect{x0, y0, x1, y1};
}

Rect apply_action(const Rect& rect, Action action, Size2 step, const ImageDims& dims) noexcept {
  Rect out = rect;
  switch (action) {
    case Action::ExpandXNeg: out.x0 = std::max(0, rect.x0 - step.width); break;
    case Action::ExpandXPos: out.x1 = std::min(dims.width, rect.x1 + step.width); break;
    case Action::ExpandYNeg: out.y0 = std::max(0, rect.y0 - step.height); break;
    case Action::ExpandYPos: out.y1 = std::min(dims.height, rect.y1 + step.height); break;
    case Action::Stop: break;
  }
  return out;
}

std::int64_t intersection_area(const Rect& a, const Rect& b) noexcept {
  const int w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const int h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  if (w <= 0 || h <= 0) return 0;
  return std::int64_t{w} * h;
}

double iou(const Rect& a, const Rect& b) noexcept {
  const std::int64_t inter = intersection_area(a, b);
  const std::int64_t uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

bool contains(const Rect& rect, FixationPoint p) noexcept {
  return rect.x0 <= p.x && p.x < rect.x1 && rect.y0 <= p.y && p.y < rect.y1;
}

}  // namespace fovea

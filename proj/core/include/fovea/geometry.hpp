#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace fovea {

struct ImageDims {
  int width = 0;
  int height = 0;
  int channels = 3;

  bool operator==(const ImageDims&) const = default;
};

/// Throws ConfigError unless width/height >= 8 and channels is 1 or 3.
void validate(const ImageDims& dims);

struct Size2 {
  int width = 0;
  int height = 0;

  bool operator==(const Size2&) const = default;
};

struct FixationPoint {
  int x = 0;
  int y = 0;

  bool operator==(const FixationPoint&) const = default;
};

/// Axis-aligned box in half-open pixel coordinates: columns [x0, x1), rows [y0, y1).
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
  std::int64_t area() const noexcept { return std::int64_t{width()} * height(); }

  /// Non-empty and inside the image.
  bool valid_in(const ImageDims& dims) const noexcept {
    return 0 <= x0 && x0 < x1 && x1 <= dims.width && 0 <= y0 && y0 < y1 && y1 <= dims.height;
  }

  bool contains(const Rect& other) const noexcept {
    return x0 <= other.x0 && y0 <= other.y0 && other.x1 <= x1 && other.y1 <= y1;
  }

  std::array<int, 4> to_array() const noexcept { return {x0, y0, x1, y1}; }

  bool operator==(const Rect&) const = default;
};

/// The glimpse-adjustment alphabet. The underlying value is the policy output index.
enum class Action : std::uint8_t {
  ExpandXNeg = 0,
  ExpandXPos = 1,
  ExpandYNeg = 2,
  ExpandYPos = 3,
  Stop = 4,
};

inline constexpr int kNumActions = 5;
inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::ExpandXNeg, Action::ExpandXPos, Action::ExpandYNeg, Action::ExpandYPos, Action::Stop};

constexpr int index_of(Action a) noexcept { return static_cast<int>(a); }
Action action_from_index(int index);

/// Stable names used in logs and trajectory records ("expand_x_neg", ..., "stop").
std::string_view to_string(Action a) noexcept;
std::optional<Action> parse_action(std::string_view name) noexcept;

struct GlimpseConfig {
  int num_glimpses = 12;
  Size2 init_size{16, 16};
  Size2 fixed_size{32, 32};
  Size2 step{16, 16};

  bool operator==(const GlimpseConfig&) const = default;
};

void validate(const GlimpseConfig& cfg);

/// First glimpse of size `init_size` centered on the fixation. Near a border the
/// box is translated inward, never truncated; it is clipped only when it is
/// larger than the image itself.
Rect initial_glimpse(FixationPoint fixation, Size2 init_size, const ImageDims& dims);

/// Moves one border outward by the step, clamped to the image. Stop is the identity.
Rect apply_action(const Rect& rect, Action action, Size2 step, const ImageDims& dims) noexcept;

std::int64_t intersection_area(const Rect& a, const Rect& b) noexcept;
double iou(const Rect& a, const Rect& b) noexcept;

/// Half-open containment: x0 <= x < x1 and y0 <= y < y1.
bool contains(const Rect& rect, FixationPoint p) noexcept;

}  // namespace fovea

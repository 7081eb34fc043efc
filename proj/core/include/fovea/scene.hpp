#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fovea/geometry.hpp"
#include "fovea/image.hpp"

namespace fovea {

enum class ShapeKind : std::uint8_t { Box, Ellipse, Plus, Frame };
enum class BackgroundFamily : std::uint8_t { Flat, Gradient, Noise };
enum class Palette : std::uint8_t { Warm, Cool };

/// Fill patterns combined with the shape to form the class label.
inline constexpr int kNumPatterns = 4;

/// Everything that parameterizes the synthetic environment. Classes are
/// (shape, fill pattern) pairs. Attribute k is a colored band along the k-th of K
/// equal arcs of the object's outline, clockwise from the top-left corner; its
/// anchor is the arc midpoint moved half a band inward.
struct SceneDistribution {
  ImageDims dims{128, 128, 3};
  std::vector<ShapeKind> shapes{ShapeKind::Box, ShapeKind::Ellipse, ShapeKind::Plus, ShapeKind::Frame};
  Size2 min_size{48, 48};
  Size2 max_size{80, 80};
  int attribute_count = 8;
  int class_count = 8;
  /// One prior per attribute; empty means 0.65 for every attribute.
  std::vector<double> attribute_priors;
  std::vector<BackgroundFamily> backgrounds{BackgroundFamily::Flat, BackgroundFamily::Gradient};
  Palette palette = Palette::Warm;
  int margin = 4;

  double prior(int k) const { return attribute_priors.empty() ? 0.65 : attribute_priors[static_cast<std::size_t>(k)]; }

  bool operator==(const SceneDistribution&) const = default;
};

void validate(const SceneDistribution& dist);

/// Canonical key/value form, used both in config files and embedded in datasets.
std::map<std::string, std::string> to_entries(const SceneDistribution& dist);
/// Starts from the defaults and overrides every key present. Unknown keys throw.
SceneDistribution distribution_from_entries(const std::map<std::string, std::string>& entries);

inline constexpr FixationPoint kAbsentAnchor{-1, -1};

struct Scene {
  Image image;
  Rect bbox_gt;
  std::vector<std::uint8_t> attributes;  // 0/1, length K
  int class_id = 0;
  std::vector<FixationPoint> anchors;  // kAbsentAnchor where the attribute is absent
  std::uint64_t seed = 0;

  int present_count() const noexcept;

  bool operator==(const Scene&) const = default;
};

/// Pure function of (seed, dist). Throws ConfigError for an invalid distribution.
Scene generate_scene(std::uint64_t seed, const SceneDistribution& dist);

std::vector<Scene> generate_scenes(std::uint64_t first_seed, int count, const SceneDistribution& dist);

ShapeKind shape_of_class(int class_id, const SceneDistribution& dist);
int pattern_of_class(int class_id, const SceneDistribution& dist);

std::string_view to_string(ShapeKind s) noexcept;
std::string_view to_string(BackgroundFamily b) noexcept;
std::string_view to_string(Palette p) noexcept;

}  // namespace fovea

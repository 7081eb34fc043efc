#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fovea/image.hpp"
#include "fovea/neural.hpp"
#include "fovea/scene.hpp"
#include "fovea/training.hpp"
#include "fovea/ventral.hpp"

namespace fovea {

/// Non-negative heat map, row-major, at the ventral analysis resolution.
struct SaliencyMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// |d s / d pixel| summed over channels, then smoothed by a 3x3 box filter
/// (zero padded). s is the sum of the logits of attributes predicted present,
/// or the top class logit. When no attribute is predicted present the single
/// largest attribute logit is used instead.
SaliencyMap saliency_map(const VentralModel& ventral, const Image& image);

/// Same computation over an already resized analysis-resolution input.
SaliencyMap saliency_from_input(const nn::Mlp& net, SimilarityMode mode, const Image& input);

/// Location of the maximum; ties go to the smallest row-major index.
FixationPoint fixation_target(const SaliencyMap& map);

/// Maps a cell of a map of size (map_w, map_h) to the pixel at that cell's center
/// in an image of the given dims.
FixationPoint map_to_image(FixationPoint cell, int map_w, int map_h, const ImageDims& dims);

/// Saliency argmax of every scene, in image coordinates.
std::vector<FixationPoint> extract_fixation_targets(const VentralModel& ventral, std::span<const Scene> scenes);

/// Low-resolution fixation regressor: average-pooled image in, normalized (x, y) out.
class M1Model {
 public:
  M1Model() = default;
  M1Model(nn::Mlp net, Size2 input_size, ImageDims image_dims);

  const nn::Mlp& net() const noexcept { return net_; }
  nn::Mlp& mutable_net() noexcept { return net_; }
  Size2 input_size() const noexcept { return input_size_; }
  ImageDims image_dims() const noexcept { return image_dims_; }

 private:
  nn::Mlp net_;
  Size2 input_size_{16, 16};
  ImageDims image_dims_{128, 128, 3};
};

/// Block-average pooling to `size`. Each dimension of the image must be a
/// multiple of the corresponding output dimension.
Image average_pool(const Image& image, Size2 size);

/// Pixel coordinate <-> [0, 1]: u = (x + 0.5) / W and x = floor(u * W), clamped.
double normalize_coord(int x, int extent) noexcept;
int denormalize_coord(double u, int extent) noexcept;
FixationPoint denormalize(double u, double v, const ImageDims& dims) noexcept;

struct M1TrainResult {
  M1Model model;
  std::vector<EpochRecord> log;
};

/// MSE regression of normalized targets. Throws ConfigError unless there is
/// exactly one target per scene; TrainingError on a non-finite loss.
M1TrainResult train_m1(std::span<const Scene> scenes, std::span<const FixationPoint> targets, Size2 input_size,
                       const TrainConfig& cfg);

FixationPoint predict_fixation(const M1Model& model, const Image& image);
std::vector<FixationPoint> predict_fixations(const M1Model& model, std::span<const Scene> scenes);

/// Percent of scenes whose predicted fixation lies inside bbox_gt.
double hit_rate(std::span<const FixationPoint> fixations, std::span<const Scene> scenes);

/// Text file: a header line "fovea-fixations v1 config=<hex> count=<n>", then
/// one "index x y" line per scene.
struct FixationTargets {
  std::uint64_t config_hash = 0;
  std::vector<FixationPoint> points;
};

std::string encode_fixation_targets(const FixationTargets& targets);
FixationTargets decode_fixation_targets(std::string_view text);
void save_fixation_targets(const std::filesystem::path& path, const FixationTargets& targets);
FixationTargets load_fixation_targets(const std::filesystem::path& path);

}  // namespace fovea

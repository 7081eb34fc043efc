#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "fovea/image.hpp"
#include "fovea/neural.hpp"
#include "fovea/scene.hpp"
#include "fovea/training.hpp"

namespace fovea {

enum class SimilarityMode : std::uint8_t { AttributeCosine, ClassConfidence };

std::string_view to_string(SimilarityMode m) noexcept;
std::optional<SimilarityMode> parse_similarity_mode(std::string_view s) noexcept;

/// Image-level label a similarity is measured against: an attribute bit vector
/// or a class index.
using SimilarityTarget = std::variant<std::vector<std::uint8_t>, int>;

SimilarityTarget target_of(const Scene& scene, SimilarityMode mode);

/// a.b / (|a| |b|), or 0 when either norm is zero.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Ground-truth oracle. AttributeCosine: cosine between the attribute vector
/// and its restriction to anchors inside `rect`. ClassConfidence: fraction of
/// present attributes whose anchors are inside `rect`.
double analytic_similarity(const Scene& scene, const Rect& rect, SimilarityMode mode);

/// Flattens an image (CHW order) into one row of `out`.
void flatten_into(const Image& image, nn::Matrix& out, Eigen::Index row);
nn::Matrix flatten(const Image& image);

/// The frozen "what" model: K sigmoid attribute outputs or C softmax class outputs
/// over a glimpse resized to `input_size`.
class VentralModel {
 public:
  VentralModel() = default;
  VentralModel(nn::Mlp net, SimilarityMode mode, Size2 input_size, int channels);

  const nn::Mlp& net() const noexcept { return net_; }
  /// Throws Error once frozen.
  nn::Mlp& mutable_net();
  void freeze() noexcept { frozen_ = true; }
  bool frozen() const noexcept { return frozen_; }

  SimilarityMode mode() const noexcept { return mode_; }
  Size2 input_size() const noexcept { return input_size_; }
  int channels() const noexcept { return channels_; }
  int output_width() const noexcept { return net_.output_width(); }

 private:
  nn::Mlp net_;
  SimilarityMode mode_ = SimilarityMode::AttributeCosine;
  Size2 input_size_{32, 32};
  int channels_ = 3;
  bool frozen_ = false;
};

/// Attribute probabilities or the class distribution for one patch.
std::vector<double> predict(const VentralModel& model, const Patch& patch);
/// Row per patch.
nn::Matrix predict_batch(const VentralModel& model, std::span<const Patch> patches);

/// AttributeCosine: cosine(predicted probabilities, target bits).
/// ClassConfidence: softmax probability of the target class.
/// Throws ConfigError when the target kind does not match the mode.
double learned_similarity(const VentralModel& model, const Patch& patch, SimilarityMode mode,
                          const SimilarityTarget& target);
double similarity_from_prediction(std::span<const double> prediction, SimilarityMode mode,
                                  const SimilarityTarget& target);

struct VentralTrainResult {
  VentralModel model;
  std::vector<EpochRecord> log;
};

/// Trains on full images resized to `input_size` with image-level labels only
/// (BCE over attributes or CE over classes). Deterministic given cfg.seed; the
/// returned model is frozen. Throws TrainingError on a non-finite loss.
VentralTrainResult train_ventral(std::span<const Scene> scenes, SimilarityMode mode, Size2 input_size,
                                 const TrainConfig& cfg);

/// Full image resized to the ventral input size.
Patch full_view(const Scene& scene, Size2 size);

/// Percent of (sample, attribute) pairs where (p >= threshold) matches the label.
double attribute_accuracy_on(const VentralModel& model, std::span<const Scene> scenes, double threshold = 0.5);

}  // namespace fovea

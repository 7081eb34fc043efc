#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fovea/dorsal_init.hpp"
#include "fovea/policy.hpp"
#include "fovea/scene.hpp"
#include "fovea/ventral.hpp"

namespace fovea {

/// IoU at or above this counts as localized (inclusive).
inline constexpr double kLocalizationIou = 0.5;

/// Per glimpse step means. Similarity and IoU have N + 1 entries (states),
/// cumulative reward has N (after each action).
struct IterationStats {
  std::vector<double> mean_similarity;
  std::vector<double> mean_iou;
  std::vector<double> mean_cum_reward;
};

/// Percentages are in [0, 100]. Metrics that need a ventral model, or the
/// other similarity mode, are absent rather than zero.
struct MetricsReport {
  static constexpr int kSchemaVersion = 1;

  std::optional<double> attribute_accuracy;
  std::optional<double> hit_miss;
  double gt_loc = 0.0;
  std::optional<double> attribute_localization;
  std::optional<double> top1_class;
  std::optional<double> top1_loc;
  std::size_t n_samples = 0;
  double mean_final_iou = 0.0;
  IterationStats per_iteration;
  std::string similarity_source;  // "analytic" or "learned"

  /// Deterministic JSON document (fixed key order, schema_version first).
  std::string to_json() const;
  /// "step,mean_similarity,mean_iou,mean_cum_reward"; reward is empty at step 0.
  std::string per_iteration_csv() const;
};

/// Percent of (sample, attribute) pairs with (p >= threshold) == target.
double attribute_accuracy(const nn::Matrix& predictions, const nn::Matrix& targets, double threshold = 0.5);
/// Percent of samples with iou >= 0.5.
double gt_localization(std::span<const Rect> final_rects, std::span<const Rect> gt_boxes);
/// Like attribute_accuracy, but every pair of an unlocalized sample counts as wrong.
double attribute_localization(const nn::Matrix& predictions, const nn::Matrix& targets,
                              std::span<const Rect> final_rects, std::span<const Rect> gt_boxes,
                              double threshold = 0.5);
double top1_class_accuracy(std::span<const int> class_preds, std::span<const int> class_targets);
/// Percent of samples both correctly classified and localized.
double top1_localization(std::span<const int> class_preds, std::span<const int> class_targets,
                         std::span<const Rect> final_rects, std::span<const Rect> gt_boxes);

/// Throws ShapeError on ragged trajectories or a length mismatch.
IterationStats iteration_statistics(std::span<const Trajectory> trajectories, std::span<const Rect> gt_boxes);

struct EvalInputs {
  std::span<const Scene> scenes;
  const M1Model* m1 = nullptr;
  /// Used instead of the M1 prediction when non-empty (one per scene).
  std::span<const FixationPoint> fixation_override;
  const PolicyNet* policy = nullptr;
  GlimpseConfig glimpse;
  RewardConfig rewards;
  /// Reporting only; actions are chosen from the policy's argmax.
  const SimilaritySource* similarity = nullptr;
  /// Optional: label predictions on the final glimpse. Never consulted for actions.
  const VentralModel* ventral = nullptr;
};

struct EvalResult {
  MetricsReport report;
  std::vector<Trajectory> trajectories;
};

/// Argmax rollouts over every scene, then all metrics.
EvalResult evaluate(const EvalInputs& inputs);

struct CrossDistributionReport {
  MetricsReport in_distribution;
  MetricsReport shifted;
  /// shifted.gt_loc / in_distribution.gt_loc (0 when the latter is 0).
  double retention = 0.0;
};

/// Evaluates the dorsal pair on scenes from both distributions with zero
/// retraining, scoring glimpses with the analytic oracle. The ventral model is
/// not needed. Throws ShapeError if the image dims differ.
CrossDistributionReport cross_distribution_eval(const PolicyNet& policy, const M1Model& m1,
                                                std::span<const Scene> train_scenes,
                                                std::span<const Scene> test_scenes, const GlimpseConfig& glimpse,
                                                const RewardConfig& rewards);

}  // namespace fovea

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fovea/geometry.hpp"
#include "fovea/ventral.hpp"

namespace fovea {

/// Reward values and max-similarity tracking. Defaults are the face-attribute
/// setting; `fine_grained_defaults()` adds the threshold and the minimum
/// satisfactory similarity used for the class-confidence setting.
struct RewardConfig {
  double r_improve = 1.0;
  double r_degrade = -0.25;
  double r_premature_stop = -1.0;
  double r_stop_after_max = 1.0;
  double r_action_after_max = -0.25;
  /// Relative improvement needed to move the running max; 0 accepts any S >= max.
  double sim_change_th = 0.0;
  std::optional<double> sim_min_satisfactory;
  double trajectory_fail_reward = -1.0;
  SimilarityMode mode = SimilarityMode::AttributeCosine;

  static RewardConfig fine_grained_defaults();

  bool operator==(const RewardConfig&) const = default;
};

/// Throws ConfigError unless r_improve > 0 > r_degrade >= r_premature_stop,
/// sim_change_th >= 0, and sim_min_satisfactory (if set) is in [0, 1].
void validate(const RewardConfig& cfg);

/// th == 0: S if S >= maxS. th > 0: S if (S - maxS) / maxS >= th; when maxS <= 0
/// the ratio is undefined and any S > maxS is accepted.
double update_max_similarity(double max_s, double s, double th) noexcept;

/// Running max of the whole trace, seeded with its first value.
double fold_max_similarity(std::span<const double> trace, double th);

/// First state index whose similarity equals the folded max.
std::size_t max_similarity_index(std::span<const double> trace, double th);

/// One reward per action; action t is judged by trace[t + 1] against trace[t].
/// Throws ShapeError unless trace.size() == actions.size() + 1.
std::vector<double> assign_rewards(std::span<const double> trace, std::span<const Action> actions,
                                   const RewardConfig& cfg);

struct ReturnsAndAdvantages {
  std::vector<double> returns;     // undiscounted rewards-to-go
  std::vector<double> advantages;  // returns - baselines
};

ReturnsAndAdvantages returns_and_advantages(std::span<const double> rewards, std::span<const double> baselines);

}  // namespace fovea

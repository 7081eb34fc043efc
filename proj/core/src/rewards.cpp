#include "fovea/rewards.hpp"

#include <cmath>
#include <string>

#include "fovea/error.hpp"

namespace fovea {

RewardConfig RewardConfig::fine_grained_defaults() {
  RewardConfig cfg;
  cfg.sim_change_th = 0.1;
  cfg.sim_min_satisfactory = 0.5;
  cfg.trajectory_fail_reward = -1.0;
  cfg.mode = SimilarityMode::ClassConfidence;
  return cfg;
}

void validate(const RewardConfig& cfg) {
  if (!(cfg.r_improve > 0.0)) throw ConfigError("r_improve must be positive");
  if (!(cfg.r_degrade < 0.0)) throw ConfigError("r_degrade must be negative");
  if (!(cfg.r_premature_stop <= cfg.r_degrade)) throw ConfigError("r_premature_stop must not exceed r_degrade");
  if (!std::isfinite(cfg.r_stop_after_max) || !std::isfinite(cfg.r_action_after_max) ||
      !std::isfinite(cfg.trajectory_fail_reward)) {
    throw ConfigError("reward values must be finite");
  }
  if (!(cfg.sim_change_th >= 0.0) || !std::isfinite(cfg.sim_change_th)) {
    throw ConfigError("sim_change_th must be a finite value >= 0");
  }
  if (cfg.sim_min_satisfactory && !(*cfg.sim_min_satisfactory >= 0.0 && *cfg.sim_min_satisfactory <= 1.0)) {
    throw ConfigError("sim_min_satisfactory must lie in [0, 1]");
  }
}

double update_max_similarity(double max_s, double s, double th) noexcept {
  if (th == 0.0) return s >= max_s ? s : max_s;
  if (max_s <= 0.0) return s > max_s ? s : max_s;
  return (s - max_s) / max_s >= th ? s : max_s;
}

double fold_max_similarity(std::span<const double> trace, double th) {
  if (trace.empty()) throw ShapeError("fold_max_similarity: empty trace");
  double m = trace.front();
  for (std::size_t t = 1; t < trace.size(); ++t) m = update_max_similarity(m, trace[t], th);
  return m;
}

std::size_t max_similarity_index(std::span<const double> trace, double th) {
  const double m = fold_max_similarity(trace, th);
  std::size_t t = 0;
  while (trace[t] != m) ++t;
  return t;
}

std::vector<double> assign_rewards(std::span<const double> trace, std::span<const Action> actions,
                                   const RewardConfig& cfg) {
  if (trace.size() != actions.size() + 1) {
    throw ShapeError("assign_rewards: trace of length " + std::to_string(trace.size()) + " for " +
                     std::to_string(actions.size()) + " actions");
  }
  const double max_s = fold_max_similarity(trace, cfg.sim_change_th);
  std::vector<double> rewards(actions.size(), 0.0);
  if (cfg.sim_min_satisfactory && max_s < *cfg.sim_min_satisfactory) {
    rewards.assign(actions.size(), cfg.trajectory_fail_reward);
    return rewards;
  }
  const std::size_t t_star = max_similarity_index(trace, cfg.sim_change_th);
  for (std::size_t t = 0; t < actions.size(); ++t) {
    const bool stop = actions[t] == Action::Stop;
    if (t + 1 <= t_star) {
      if (stop) rewards[t] = cfg.r_premature_stop;
      else rewards[t] = trace[t + 1] > trace[t] ? cfg.r_improve : cfg.r_degrade;
    } else {
      rewards[t] = stop ? cfg.r_stop_after_max : cfg.r_action_after_max;
    }
  }
  return rewards;
}

ReturnsAndAdvantages returns_and_advantages(std::span<const double> rewards, std::span<const double> baselines) {
  if (rewards.size() != baselines.size()) throw ShapeError("returns_and_advantages: length mismatch");
  ReturnsAndAdvantages out;
  out.returns.resize(rewards.size());
  out.advantages.resize(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc += rewards[i];
    out.returns[i] = acc;
    out.advantages[i] = acc - baselines[i];
  }
  return out;
}

}  // namespace fovea

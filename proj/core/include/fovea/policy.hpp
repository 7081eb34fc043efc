#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fovea/geometry.hpp"
#include "fovea/image.hpp"
#include "fovea/neural.hpp"
#include "fovea/rewards.hpp"
#include "fovea/scene.hpp"
#include "fovea/training.hpp"
#include "fovea/ventral.hpp"

namespace fovea {

/// Glimpse-adjustment policy: a trunk over the resized patch with an action
/// head (one logit per Action) and a scalar baseline head.
class PolicyNet {
 public:
  static constexpr const char* kActionHead = "action";
  static constexpr const char* kBaselineHead = "baseline";

  PolicyNet() = default;
  PolicyNet(Size2 input_size, int channels, const std::vector<int>& hidden, std::uint64_t seed);
  /// Adopts an existing network; throws ShapeError if its heads are not (5, 1).
  PolicyNet(nn::Mlp net, Size2 input_size, int channels);

  const nn::Mlp& net() const noexcept { return net_; }
  nn::Mlp& mutable_net() noexcept { return net_; }
  Size2 input_size() const noexcept { return input_size_; }
  int channels() const noexcept { return channels_; }

 private:
  nn::Mlp net_;
  Size2 input_size_{32, 32};
  int channels_ = 3;
};

/// Scores a glimpse. The learned source reads the frozen ventral model; the
/// analytic source reads only the scene's ground-truth anchors.
class SimilaritySource {
 public:
  static SimilaritySource analytic(SimilarityMode mode);
  /// `ventral` must outlive the source.
  static SimilaritySource learned(const VentralModel& ventral);

  double operator()(const Scene& scene, const Patch& patch) const;
  SimilarityMode mode() const noexcept { return mode_; }
  bool uses_ventral() const noexcept { return ventral_ != nullptr; }

 private:
  SimilarityMode mode_ = SimilarityMode::AttributeCosine;
  const VentralModel* ventral_ = nullptr;
};

enum class RolloutMode : std::uint8_t { Sample, Argmax };

struct Trajectory {
  std::uint64_t scene_id = 0;
  std::uint64_t seed = 0;
  FixationPoint fixation;
  std::vector<Rect> rects;           // N + 1 states
  std::vector<Action> actions;       // N
  std::vector<double> log_probs;     // N, log pi(a_t | patch_t)
  std::vector<double> baselines;     // N
  std::vector<double> similarities;  // N + 1; empty when no source was given
  std::vector<double> rewards;       // N
  std::vector<double> returns;       // N
  std::vector<double> advantages;    // N
  /// Flattened patches, one row per action; kept only when requested.
  nn::Matrix inputs;

  double total_reward() const noexcept;
};

struct RolloutRequest {
  const Scene* scene = nullptr;
  std::uint64_t scene_id = 0;
  FixationPoint fixation;
  std::uint64_t seed = 0;  // only read in sample mode
};

struct RolloutOptions {
  RolloutMode mode = RolloutMode::Argmax;
  /// When null, no similarities (and hence no rewards) are computed; action
  /// selection never depends on it either way.
  const SimilaritySource* similarity = nullptr;
  const RewardConfig* rewards = nullptr;
  bool keep_inputs = false;
};

/// Rolls out every request in lockstep, batching the policy forward pass per
/// step. Each trajectory draws from its own RNG stream, so results do not
/// depend on how requests are grouped. Argmax ties go to the lowest index.
std::vector<Trajectory> collect_trajectories(const PolicyNet& policy, std::span<const RolloutRequest> requests,
                                             const GlimpseConfig& glimpse, const RolloutOptions& options);

Trajectory collect_trajectory(const Scene& scene, std::uint64_t scene_id, const PolicyNet& policy,
                              const GlimpseConfig& glimpse, FixationPoint fixation, const RolloutOptions& options,
                              std::uint64_t seed = 0);

/// Fills rewards, returns, and advantages from the similarities.
void score_trajectory(Trajectory& traj, const RewardConfig& cfg);

/// Weight of the baseline regression term in the composite loss.
inline constexpr double kBaselineLossWeight = 1.0;

/// -mean(log pi(a) * A) + baseline_weight * mean((b - G)^2) over all rows of
/// `logits` (action logits followed by the baseline column). Advantages and
/// returns are constants, so no gradient reaches the baseline through A.
nn::LossResult reinforce_loss(const nn::Matrix& logits, std::span<const int> actions,
                              std::span<const double> advantages, std::span<const double> returns,
                              double baseline_weight = kBaselineLossWeight);

struct UpdateStats {
  double loss = 0.0;
  double policy_loss = 0.0;
  double baseline_loss = 0.0;
  std::size_t samples = 0;
};

/// One optimizer step on a batch of sample-mode trajectories collected with
/// keep_inputs. Throws TrainingError, leaving the policy untouched, if the loss
/// or any gradient is non-finite.
UpdateStats reinforce_update(PolicyNet& policy, nn::OptimizerState& optimizer, std::span<const Trajectory> batch,
                             double lr, double baseline_weight = kBaselineLossWeight);

struct DorsalTrainInputs {
  std::span<const Scene> scenes;
  std::span<const FixationPoint> fixations;  // one per scene
  const SimilaritySource* similarity = nullptr;
  GlimpseConfig glimpse;
  RewardConfig rewards;
};

struct DorsalTrainResult {
  std::vector<EpochRecord> log;
};

/// Called after every epoch with the updated policy; used for checkpointing.
using EpochCallback = std::function<void(const PolicyNet&, const EpochRecord&)>;

/// Epochs of (sample rollouts -> rewards -> REINFORCE step) over shuffled
/// minibatches of scenes. Logs mean total reward, final IoU, and final
/// similarity per epoch. Throws TrainingError if the mean reward is non-finite.
DorsalTrainResult train_dorsal(PolicyNet& policy, const DorsalTrainInputs& inputs, const TrainConfig& cfg,
                               const EpochCallback& on_epoch = {});

/// One JSON object per line: scene id, fixation, rects, action names,
/// similarities, rewards, and returns.
std::string trajectory_record(const Trajectory& traj);

}  // namespace fovea

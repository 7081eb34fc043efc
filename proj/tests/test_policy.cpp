#include <gtest/gtest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "fovea/error.hpp"
#include "fovea/oracles.hpp"
#include "fovea/policy.hpp"
#include "fovea/rng.hpp"

namespace fovea {
namespace {

const GlimpseConfig kGlimpse{};

PolicyNet small_policy(std::uint64_t seed) { return PolicyNet({32, 32}, 3, {16}, seed); }

// Zero weights and a bias that makes `favored` the argmax everywhere.
PolicyNet biased_policy(Action favored, double margin) {
  PolicyNet p = small_policy(1);
  auto& net = p.mutable_net();
  for (double& v : net.mutable_parameters()) v = 0.0;
  net.mutable_bias(net.num_layers() - 1)(index_of(favored)) = margin;
  return p;
}

class Rollouts : public ::testing::Test {
 protected:
  void SetUp() override { scenes_ = generate_scenes(1234, 6, SceneDistribution{}); }
  FixationPoint centre(const Scene& s) const {
    return {(s.bbox_gt.x0 + s.bbox_gt.x1) / 2, (s.bbox_gt.y0 + s.bbox_gt.y1) / 2};
  }
  std::vector<Scene> scenes_;
};

TEST_F(Rollouts, StopFavoringPolicyNeverMoves) {
  const PolicyNet p = biased_policy(Action::Stop, 20.0);
  const Trajectory t = collect_trajectory(scenes_[0], 0, p, kGlimpse, centre(scenes_[0]), {});
  ASSERT_EQ(t.rects.size(), static_cast<std::size_t>(kGlimpse.num_glimpses + 1));
  EXPECT_EQ(t.rects.back(), t.rects.front());
  for (Action a : t.actions) EXPECT_EQ(a, Action::Stop);
}

TEST_F(Rollouts, ArgmaxTiesGoToLowestIndex) {
  const PolicyNet p = biased_policy(Action::Stop, 0.0);  // all logits equal
  const Trajectory t = collect_trajectory(scenes_[0], 0, p, kGlimpse, centre(scenes_[0]), {});
  for (Action a : t.actions) EXPECT_EQ(a, Action::ExpandXNeg);
}

TEST_F(Rollouts, ArgmaxIsSeedIndependent) {
  const PolicyNet p = small_policy(3);
  RolloutOptions o;
  const auto a = collect_trajectory(scenes_[1], 1, p, kGlimpse, centre(scenes_[1]), o, 11);
  const auto b = collect_trajectory(scenes_[1], 1, p, kGlimpse, centre(scenes_[1]), o, 999);
  EXPECT_EQ(a.rects, b.rects);
  EXPECT_EQ(a.log_probs, b.log_probs);
}

TEST_F(Rollouts, SampleModeReproducesWithSeed) {
  const PolicyNet p = small_policy(4);
  RolloutOptions o;
  o.mode = RolloutMode::Sample;
  const auto a = collect_trajectory(scenes_[2], 2, p, kGlimpse, centre(scenes_[2]), o, 77);
  const auto b = collect_trajectory(scenes_[2], 2, p, kGlimpse, centre(scenes_[2]), o, 77);
  EXPECT_EQ(a.actions, b.actions);
  EXPECT_EQ(a.rects, b.rects);
  bool differs = false;
  for (std::uint64_t s = 78; s < 90 && !differs; ++s) {
    differs = collect_trajectory(scenes_[2], 2, p, kGlimpse, centre(scenes_[2]), o, s).actions != a.actions;
  }
  EXPECT_TRUE(differs);
}

TEST_F(Rollouts, BatchingDoesNotChangeTrajectories) {
  const PolicyNet p = small_policy(5);
  const auto sim = SimilaritySource::analytic(SimilarityMode::AttributeCosine);
  const RewardConfig rc;
  RolloutOptions o{RolloutMode::Sample, &sim, &rc, false};
  std::vector<RolloutRequest> reqs;
  for (std::size_t i = 0; i < scenes_.size(); ++i) reqs.push_back({&scenes_[i], i, centre(scenes_[i]), 100 + i});
  const auto all = collect_trajectories(p, reqs, kGlimpse, o);
  for (std::size_t i = 0; i < scenes_.size(); ++i) {
    const auto one = collect_trajectory(scenes_[i], i, p, kGlimpse, centre(scenes_[i]), o, 100 + i);
    EXPECT_EQ(one.actions, all[i].actions);
    EXPECT_EQ(one.log_probs, all[i].log_probs);
    EXPECT_EQ(one.rewards, all[i].rewards);
  }
}

TEST_F(Rollouts, PropertyTrajectoryInvariants) {
  const PolicyNet p = small_policy(6);
  const auto sim = SimilaritySource::analytic(SimilarityMode::AttributeCosine);
  const RewardConfig rc;
  RolloutOptions o{RolloutMode::Sample, &sim, &rc, true};
  for (std::size_t i = 0; i < scenes_.size(); ++i) {
    const auto t = collect_trajectory(scenes_[i], i, p, kGlimpse, centre(scenes_[i]), o, i);
    ASSERT_EQ(t.similarities.size(), t.rects.size());
    ASSERT_EQ(t.inputs.rows(), kGlimpse.num_glimpses);
    for (double lp : t.log_probs) EXPECT_LE(lp, 0.0);
    for (std::size_t s = 0; s + 1 < t.rects.size(); ++s) EXPECT_TRUE(t.rects[s + 1].contains(t.rects[s]));
    // Rewards are a function of (trace, actions, config) alone.
    EXPECT_EQ(t.rewards, assign_rewards(t.similarities, t.actions, rc));
    EXPECT_EQ(t.returns.front(), t.total_reward());
  }
  const auto probs = nn::softmax_rows(p.net().forward(nn::Matrix::Zero(1, p.net().input_width())).outputs[0]);
  EXPECT_GT(probs.minCoeff(), 0.0);
}

TEST_F(Rollouts, InputSizeMismatchThrows) {
  const PolicyNet p({16, 16}, 3, {8}, 1);
  EXPECT_THROW(collect_trajectory(scenes_[0], 0, p, kGlimpse, centre(scenes_[0]), {}), ConfigError);
}

TEST_F(Rollouts, RecordHasStableKeys) {
  const auto sim = SimilaritySource::analytic(SimilarityMode::AttributeCosine);
  const RewardConfig rc;
  const auto t = collect_trajectory(scenes_[0], 42, small_policy(7), kGlimpse, centre(scenes_[0]), {RolloutMode::Argmax, &sim, &rc, false});
  const auto j = nlohmann::json::parse(trajectory_record(t));
  EXPECT_EQ(j["scene"], 42);
  EXPECT_EQ(j["rects"].size(), 13u);
  EXPECT_EQ(j["actions"].size(), 12u);
  EXPECT_EQ(trajectory_record(t), trajectory_record(t));
}

// ------------------------------------------------------------------ REINFORCE

TEST(ReinforceLoss, ZeroAdvantagesLeaveOnlyBaselineGradient) {
  nn::Matrix logits = nn::Matrix::Random(4, 6);
  const std::vector<int> actions{0, 4, 2, 1};
  const std::vector<double> adv(4, 0.0), ret{1.0, -0.5, 0.2, 2.0};
  const auto r = reinforce_loss(logits, actions, adv, ret);
  EXPECT_EQ(r.grad.leftCols(5).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT(r.grad.col(5).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ReinforceLoss, GradientMatchesFiniteDifferences) {
  const auto r = oracle::gradient_suite(oracle::GradLoss::Reinforce, 5, 21);
  EXPECT_TRUE(r.passed()) << r.first_failure;
}

TEST(ReinforceUpdate, PositiveAdvantageRaisesTakenActionProbability) {
  const auto scenes = generate_scenes(77, 1, SceneDistribution{});
  PolicyNet p = small_policy(8);
  GlimpseConfig g = kGlimpse;
  g.num_glimpses = 1;
  RolloutOptions o;
  o.mode = RolloutMode::Sample;
  o.keep_inputs = true;
  Trajectory t = collect_trajectory(scenes[0], 0, p, g, {64, 64}, o, 5);
  t.rewards = {1.0};
  t.returns = {1.0};
  t.baselines = {0.0};
  t.advantages = {1.0};
  const int a = index_of(t.actions[0]);
  auto prob = [&](const PolicyNet& pol) {
    return nn::softmax_rows(pol.net().forward(t.inputs).outputs[0])(0, a);
  };
  const double before = prob(p);
  nn::OptimizerConfig sgd;
  sgd.kind = nn::OptimizerKind::Sgd;
  sgd.momentum = 0.0;
  nn::OptimizerState st(sgd, p.net().parameters().size());
  const std::vector<Trajectory> batch{t};
  // Baseline weight 0 isolates the policy-gradient term from the shared layers.
  const auto stats = reinforce_update(p, st, batch, 1e-3, 0.0);
  EXPECT_EQ(stats.samples, 1u);
  EXPECT_GT(prob(p), before);
}

TEST(ReinforceUpdate, NonFiniteAdvantageIsRejected) {
  const auto scenes = generate_scenes(78, 1, SceneDistribution{});
  PolicyNet p = small_policy(9);
  RolloutOptions o;
  o.mode = RolloutMode::Sample;
  o.keep_inputs = true;
  Trajectory t = collect_trajectory(scenes[0], 0, p, kGlimpse, {64, 64}, o, 5);
  t.rewards.assign(t.actions.size(), 0.0);
  t.returns.assign(t.actions.size(), 0.0);
  t.advantages.assign(t.actions.size(), std::nan(""));
  const auto fp = p.net().fingerprint();
  nn::OptimizerState st(nn::OptimizerConfig{}, p.net().parameters().size());
  const std::vector<Trajectory> batch{t};
  EXPECT_THROW(reinforce_update(p, st, batch, 1e-3), TrainingError);
  EXPECT_EQ(p.net().fingerprint(), fp);
}

TEST(TrainDorsal, LogsFiniteRewardsAndLeavesVentralUntouched) {
  const auto scenes = generate_scenes(5000, 24, SceneDistribution{});
  TrainConfig vc;
  vc.epochs = 2;
  vc.hidden = {16};
  const auto ventral = train_ventral(scenes, SimilarityMode::AttributeCosine, {32, 32}, vc);
  const auto before = ventral.model.net().fingerprint();
  const auto sim = SimilaritySource::learned(ventral.model);
  EXPECT_TRUE(sim.uses_ventral());
  EXPECT_FALSE(SimilaritySource::analytic(SimilarityMode::AttributeCosine).uses_ventral());

  std::vector<FixationPoint> fix(scenes.size(), FixationPoint{64, 64});
  TrainConfig dc;
  dc.epochs = 3;
  dc.batch_size = 8;
  dc.hidden = {16};
  PolicyNet p = small_policy(10);
  int calls = 0;
  const auto r = train_dorsal(p, DorsalTrainInputs{scenes, fix, &sim, kGlimpse, RewardConfig{}}, dc,
                              [&](const PolicyNet&, const EpochRecord& rec) {
                                ++calls;
                                ASSERT_TRUE(rec.mean_reward && std::isfinite(*rec.mean_reward));
                                ASSERT_TRUE(rec.mean_iou.has_value());
                              });
  EXPECT_EQ(calls, 3);
  EXPECT_EQ(r.log.size(), 3u);
  EXPECT_EQ(ventral.model.net().fingerprint(), before);
}

TEST(PolicyNet, AdoptingWrongHeadsThrows) {
  nn::Mlp wrong(make_spec(32 * 32 * 3, {8}, {{"action", 4, nn::OutputMap::Softmax}, {"baseline", 1, nn::OutputMap::Identity}}), 1);
  EXPECT_THROW(PolicyNet(wrong, {32, 32}, 3), ShapeError);
}

}  // namespace
}  // namespace fovea

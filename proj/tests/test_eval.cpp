#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "fovea/error.hpp"
#include "fovea/eval.hpp"
#include "fovea/rng.hpp"

namespace fovea {
namespace {

using nn::Matrix;

Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
  Matrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

const Rect kGt{10, 10, 30, 30};

// A rect with a chosen IoU against kGt (width shrinks from the right).
Rect with_iou_above(bool localized) { return localized ? Rect{10, 10, 28, 30} : Rect{10, 10, 16, 30}; }

TEST(AttributeAccuracy, Examples) {
  const Matrix t = rows({{1, 0, 1, 1}, {0, 0, 1, 0}});
  EXPECT_EQ(attribute_accuracy(t, t), 100.0);
  const Matrix half = Matrix::Constant(2, 4, 0.5);
  EXPECT_EQ(attribute_accuracy(half, t), 100.0 * 4 / 8);
  EXPECT_EQ(attribute_accuracy(rows({{0.9, 0.1, 0.2, 0.7}}), rows({{1, 0, 1, 1}})), 75.0);
  EXPECT_THROW(attribute_accuracy(t, Matrix::Zero(2, 3)), ShapeError);
}

TEST(GtLocalization, Examples) {
  const std::vector<Rect> gt{kGt, kGt};
  EXPECT_EQ(gt_localization(gt, gt), 100.0);
  const std::vector<Rect> far{{40, 40, 50, 50}, {0, 0, 5, 5}};
  EXPECT_EQ(gt_localization(far, gt), 0.0);
  const std::vector<Rect> mixed{{10, 10, 30, 22}, {10, 10, 30, 16}};  // IoU 0.6, 0.3
  EXPECT_EQ(gt_localization(mixed, gt), 50.0);
  const std::vector<Rect> half{{10, 10, 30, 20}};  // exactly 0.5 counts
  EXPECT_EQ(gt_localization(half, std::vector<Rect>{kGt}), 100.0);
  EXPECT_THROW(gt_localization(mixed, std::vector<Rect>{kGt}), ShapeError);
}

TEST(AttributeLocalization, Examples) {
  const Matrix t = rows({{1, 0, 1, 0, 1}, {0, 1, 1, 0, 0}});
  const std::vector<Rect> gt{kGt, kGt};
  const std::vector<Rect> loc{kGt, kGt}, unloc{{0, 0, 2, 2}, {0, 0, 2, 2}};
  EXPECT_EQ(attribute_localization(t, t, loc, gt), 100.0);
  EXPECT_EQ(attribute_localization(t, t, unloc, gt), 0.0);
  // First sample localized with 4 of 5 right, second unlocalized: 4 / 10.
  const Matrix p = rows({{1, 0, 1, 0, 0}, {0, 1, 1, 0, 0}});
  const std::vector<Rect> one{kGt, {0, 0, 2, 2}};
  EXPECT_EQ(attribute_localization(p, t, one, gt), 40.0);
}

TEST(Top1Localization, Examples) {
  const std::vector<Rect> gt(4, kGt);
  const std::vector<int> target{1, 2, 3, 4};
  const std::vector<Rect> all_loc(4, kGt), none_loc(4, Rect{0, 0, 2, 2});
  EXPECT_EQ(top1_localization(target, target, all_loc, gt), 100.0);
  EXPECT_EQ(top1_localization(target, target, none_loc, gt), 0.0);
  const std::vector<int> pred{1, 2, 0, 0};
  const std::vector<Rect> mix{kGt, Rect{0, 0, 2, 2}, kGt, Rect{0, 0, 2, 2}};
  EXPECT_EQ(top1_localization(pred, target, mix, gt), 25.0);
  EXPECT_EQ(top1_class_accuracy(pred, target), 50.0);
}

// Every metric against a naive per-sample loop on random small inputs.
TEST(Metrics, PropertyMatchNaiveLoopsAndInvariants) {
  Rng rng = make_stream({90});
  for (int trial = 0; trial < 200; ++trial) {
    const int n = uniform_int(rng, 1, 20), k = uniform_int(rng, 1, 6);
    Matrix p(n, k), t(n, k);
    std::vector<Rect> fin, gt;
    std::vector<int> cp, ct;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) {
        p(i, j) = uniform_int(rng, 0, 4) / 4.0;
        t(i, j) = uniform_int(rng, 0, 1);
      }
      gt.push_back(kGt);
      fin.push_back(with_iou_above(uniform_int(rng, 0, 1) == 1));
      cp.push_back(uniform_int(rng, 0, 2));
      ct.push_back(uniform_int(rng, 0, 2));
    }
    double acc = 0, aloc = 0, loc = 0, cls = 0, t1 = 0;
    for (int i = 0; i < n; ++i) {
      const bool l = iou(fin[static_cast<std::size_t>(i)], kGt) >= 0.5;
      loc += l;
      cls += cp[static_cast<std::size_t>(i)] == ct[static_cast<std::size_t>(i)];
      t1 += l && cp[static_cast<std::size_t>(i)] == ct[static_cast<std::size_t>(i)];
      for (int j = 0; j < k; ++j) {
        const bool ok = (p(i, j) >= 0.5) == (t(i, j) == 1.0);
        acc += ok;
        aloc += ok && l;
      }
    }
    const double nk = double(n) * k;
    ASSERT_NEAR(attribute_accuracy(p, t), 100 * acc / nk, 1e-9);
    ASSERT_NEAR(attribute_localization(p, t, fin, gt), 100 * aloc / nk, 1e-9);
    ASSERT_NEAR(gt_localization(fin, gt), 100 * loc / n, 1e-9);
    ASSERT_NEAR(top1_class_accuracy(cp, ct), 100 * cls / n, 1e-9);
    ASSERT_NEAR(top1_localization(cp, ct, fin, gt), 100 * t1 / n, 1e-9);
    ASSERT_LE(attribute_localization(p, t, fin, gt), attribute_accuracy(p, t));
    ASSERT_LE(top1_localization(cp, ct, fin, gt), top1_class_accuracy(cp, ct));
    ASSERT_LE(top1_localization(cp, ct, fin, gt), gt_localization(fin, gt));
  }
}

Trajectory fake(std::vector<Rect> rects, std::vector<double> sims, std::vector<double> rewards) {
  Trajectory t;
  t.rects = std::move(rects);
  t.similarities = std::move(sims);
  t.rewards = std::move(rewards);
  t.actions.assign(t.rewards.size(), Action::Stop);
  t.returns = returns_and_advantages(t.rewards, std::vector<double>(t.rewards.size(), 0.0)).returns;
  return t;
}

TEST(IterationStatistics, Examples) {
  const Rect far{40, 40, 50, 50};
  const std::vector<Rect> gt{kGt, kGt};
  const auto a = fake({far, kGt}, {0.1, 0.9}, {1.0});
  const auto b = fake({kGt, far}, {0.5, 0.3}, {-0.25});
  const std::vector<Trajectory> one{a};
  const auto s1 = iteration_statistics(one, std::vector<Rect>{kGt});
  EXPECT_EQ(s1.mean_similarity, (std::vector<double>{0.1, 0.9}));
  EXPECT_EQ(s1.mean_iou, (std::vector<double>{0.0, 1.0}));
  const std::vector<Trajectory> two{a, b};
  const auto s2 = iteration_statistics(two, gt);
  EXPECT_EQ(s2.mean_iou, (std::vector<double>{0.5, 0.5}));

  const auto c = fake({far, far, far, kGt}, {0, 0, 0, 1}, {-0.25, 1.0, 0.5});
  const std::vector<Trajectory> three{c};
  const auto s3 = iteration_statistics(three, std::vector<Rect>{kGt});
  EXPECT_DOUBLE_EQ(s3.mean_cum_reward.back(), c.returns.front());

  const auto ragged = fake({far, kGt, kGt}, {0, 1, 1}, {1, 1});
  const std::vector<Trajectory> bad{a, ragged};
  EXPECT_THROW(iteration_statistics(bad, gt), ShapeError);
}

TEST(MetricsReport, JsonAndCsvAreStable) {
  MetricsReport r;
  r.gt_loc = 62.5;
  r.hit_miss = 90.0;
  r.n_samples = 8;
  r.per_iteration.mean_similarity = {0.1, 0.4};
  r.per_iteration.mean_iou = {0.2, 0.6};
  r.per_iteration.mean_cum_reward = {1.0};
  r.similarity_source = "analytic";
  const auto j = nlohmann::json::parse(r.to_json());
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["gt_loc"], 62.5);
  EXPECT_EQ(r.to_json(), r.to_json());
  const std::string csv = r.per_iteration_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,mean_similarity,mean_iou,mean_cum_reward");
}

// -------------------------------------------------------------- evaluation

class Evaluation : public ::testing::Test {
 protected:
  void SetUp() override {
    scenes_ = generate_scenes(321, 12, SceneDistribution{});
    policy_ = PolicyNet({32, 32}, 3, {16}, 4);
    m1_ = M1Model(nn::Mlp(make_spec(16 * 16 * 3, {8}, {{"xy", 2, nn::OutputMap::Identity}}), 5), {16, 16},
                  ImageDims{128, 128, 3});
  }
  EvalInputs inputs() const {
    EvalInputs in;
    in.scenes = scenes_;
    in.m1 = &m1_;
    in.policy = &policy_;
    in.similarity = &sim_;
    return in;
  }
  std::vector<Scene> scenes_;
  PolicyNet policy_;
  M1Model m1_;
  SimilaritySource sim_ = SimilaritySource::analytic(SimilarityMode::AttributeCosine);
};

TEST_F(Evaluation, DeterministicReport) {
  const auto a = evaluate(inputs());
  const auto b = evaluate(inputs());
  EXPECT_EQ(a.report.to_json(), b.report.to_json());
  EXPECT_EQ(a.report.n_samples, scenes_.size());
  ASSERT_TRUE(a.report.hit_miss.has_value());
}

TEST_F(Evaluation, VentralModelNeverChangesActions) {
  TrainConfig vc;
  vc.epochs = 1;
  vc.hidden = {8};
  const auto v = train_ventral(scenes_, SimilarityMode::AttributeCosine, {32, 32}, vc);
  EvalInputs with = inputs();
  with.ventral = &v.model;
  const auto a = evaluate(inputs());
  const auto b = evaluate(with);
  ASSERT_EQ(a.trajectories.size(), b.trajectories.size());
  for (std::size_t i = 0; i < a.trajectories.size(); ++i) EXPECT_EQ(a.trajectories[i].rects, b.trajectories[i].rects);
  EXPECT_FALSE(a.report.attribute_accuracy.has_value());
  EXPECT_TRUE(b.report.attribute_accuracy.has_value());
  EXPECT_LE(*b.report.attribute_localization, *b.report.attribute_accuracy);
}

TEST_F(Evaluation, CrossDistributionIdentityEqualsStandardEvaluation) {
  const auto c = cross_distribution_eval(policy_, m1_, scenes_, scenes_, GlimpseConfig{}, RewardConfig{});
  const auto e = evaluate(inputs());
  EXPECT_EQ(c.in_distribution.to_json(), e.report.to_json());
  EXPECT_EQ(c.shifted.to_json(), e.report.to_json());
}

TEST_F(Evaluation, CrossDistributionRejectsDimsMismatch) {
  SceneDistribution other;
  other.dims = {96, 96, 3};
  const auto shifted = generate_scenes(1, 2, other);
  EXPECT_THROW(cross_distribution_eval(policy_, m1_, scenes_, shifted, GlimpseConfig{}, RewardConfig{}), ShapeError);
}

TEST_F(Evaluation, FixationOverrideIsUsed) {
  std::vector<FixationPoint> fix;
  for (const auto& s : scenes_) fix.push_back({s.bbox_gt.x0, s.bbox_gt.y0});
  EvalInputs in = inputs();
  in.fixation_override = fix;
  const auto r = evaluate(in);
  for (std::size_t i = 0; i < fix.size(); ++i) EXPECT_EQ(r.trajectories[i].fixation, fix[i]);
  EXPECT_FALSE(r.report.hit_miss.has_value()) << "hit rate describes M1, which was bypassed";
}

}  // namespace
}  // namespace fovea

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "fovea/dorsal_init.hpp"
#include "fovea/error.hpp"
#include "fovea/rng.hpp"
#include "fovea/training.hpp"

namespace fovea {
namespace {

using nn::Matrix;

nn::Mlp attribute_net(int input_width, int k, std::uint64_t seed) {
  return nn::Mlp(make_spec(input_width, {12}, {{"label", k, nn::OutputMap::Sigmoid}}), seed);
}

Image random_image(int c, int h, int w, std::uint64_t seed) {
  Image img(c, h, w);
  Rng rng = make_stream({seed});
  for (float& v : img.data) v = static_cast<float>(uniform01(rng));
  return img;
}

TEST(Saliency, ConstantOutputModelGivesZeroMap) {
  nn::Mlp net = attribute_net(3 * 8 * 8, 4, 1);
  for (double& p : net.mutable_parameters()) p = 0.0;
  const SaliencyMap m = saliency_from_input(net, SimilarityMode::AttributeCosine, random_image(3, 8, 8, 2));
  EXPECT_EQ(m.width, 8);
  EXPECT_EQ(m.height, 8);
  for (double v : m.values) EXPECT_EQ(v, 0.0);
}

// A linear model that reads one pixel. The 3x3 box filter spreads its gradient
// over a plateau, so the peak value is attained at that pixel and the argmax
// (smallest row-major index on the plateau) sits in its neighbourhood.
TEST(Saliency, OnePixelModelPeaksAtThatPixel) {
  const int w = 10, h = 7, px = 6, py = 3;
  nn::Mlp net(nn::MlpSpec{{3 * h * w, 1}, {}, {{"label", 1, nn::OutputMap::Sigmoid}}}, 1);
  for (double& p : net.mutable_parameters()) p = 0.0;
  net.mutable_weight(0)(0, 1 * h * w + py * w + px) = 2.5;  // green channel
  net.mutable_bias(0)(0) = 1.0;
  const SaliencyMap m = saliency_from_input(net, SimilarityMode::AttributeCosine, random_image(3, h, w, 3));
  const double peak = *std::max_element(m.values.begin(), m.values.end());
  EXPECT_NEAR(m.at(px, py), 2.5 / 9.0, 1e-15);
  EXPECT_EQ(m.at(px, py), peak);
  const FixationPoint t = fixation_target(m);
  EXPECT_LE(std::abs(t.x - px), 1);
  EXPECT_LE(std::abs(t.y - py), 1);
  EXPECT_EQ(m.at(px + 2, py), 0.0);
}

// Independent oracle: central differences of s per pixel and channel, summed
// as absolute values and box filtered by hand.
TEST(Saliency, MatchesFiniteDifferences) {
  const int w = 6, h = 5, c = 3;
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    const nn::Mlp net = attribute_net(c * h * w, 3, seed);
    const Image img = random_image(c, h, w, seed + 100);
    const Matrix x = flatten(img);
    const Matrix logits = net.forward(x).logits();
    std::vector<int> chosen;
    for (int k = 0; k < 3; ++k)
      if (logits(0, k) >= 0) chosen.push_back(k);
    if (chosen.empty()) {
      Eigen::Index best;
      logits.row(0).maxCoeff(&best);
      chosen.push_back(static_cast<int>(best));
    }
    auto s_of = [&](const Matrix& in) {
      const Matrix z = net.forward(in).logits();
      double s = 0;
      for (int k : chosen) s += z(0, k);
      return s;
    };
    std::vector<double> raw(static_cast<std::size_t>(h * w), 0.0);
    const double step = 1e-6;
    for (int i = 0; i < c * h * w; ++i) {
      Matrix xp = x, xm = x;
      xp(0, i) += step;
      xm(0, i) -= step;
      raw[static_cast<std::size_t>(i % (h * w))] += std::abs((s_of(xp) - s_of(xm)) / (2 * step));
    }
    const SaliencyMap m = saliency_from_input(net, SimilarityMode::AttributeCosine, img);
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        double sum = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy, xq = xx + dx;
            if (yy >= 0 && yy < h && xq >= 0 && xq < w) sum += raw[static_cast<std::size_t>(yy * w + xq)];
          }
        const double expected = sum / 9.0;
        EXPECT_LE(std::abs(m.at(xx, y) - expected), 1e-5 * std::max(std::abs(expected), 1e-5));
      }
    }
  }
}

TEST(Saliency, DeterministicAndNonNegative) {
  const nn::Mlp net = attribute_net(3 * 8 * 8, 4, 20);
  const Image img = random_image(3, 8, 8, 21);
  const SaliencyMap a = saliency_from_input(net, SimilarityMode::AttributeCosine, img);
  const SaliencyMap b = saliency_from_input(net, SimilarityMode::AttributeCosine, img);
  EXPECT_EQ(a.values, b.values);
  for (double v : a.values) EXPECT_GE(v, 0.0);
}

TEST(FixationTarget, TieBreakAndPeaks) {
  SaliencyMap m{8, 8, std::vector<double>(64, 0.0)};
  m.values[5 * 8 + 2] = 3.0;
  EXPECT_EQ(fixation_target(m), (FixationPoint{2, 5}));
  std::fill(m.values.begin(), m.values.end(), 1.0);
  EXPECT_EQ(fixation_target(m), (FixationPoint{0, 0}));
  std::fill(m.values.begin(), m.values.end(), 0.0);
  m.values[3 * 8 + 4] = 2.0;  // (x=4, y=3)
  m.values[5 * 8 + 2] = 2.0;  // (x=2, y=5)
  EXPECT_EQ(fixation_target(m), (FixationPoint{4, 3}));
  EXPECT_THROW(fixation_target(SaliencyMap{}), ShapeError);
}

TEST(FixationTarget, PropertyAttainsGlobalMax) {
  Rng rng = make_stream({30});
  for (int i = 0; i < 500; ++i) {
    SaliencyMap m{7, 9, std::vector<double>(63)};
    for (double& v : m.values) v = static_cast<double>(uniform_int(rng, 0, 5));
    const FixationPoint p = fixation_target(m);
    EXPECT_EQ(m.at(p.x, p.y), *std::max_element(m.values.begin(), m.values.end()));
  }
}

TEST(MapToImage, CellCentres) {
  const ImageDims d{128, 128, 3};
  EXPECT_EQ(map_to_image({0, 0}, 32, 32, d), (FixationPoint{2, 2}));
  EXPECT_EQ(map_to_image({31, 16}, 32, 32, d), (FixationPoint{126, 66}));
}

// ------------------------------------------------------------------------ M1

TEST(M1, CoordinateNormalization) {
  EXPECT_DOUBLE_EQ(normalize_coord(0, 128), 0.5 / 128);
  for (int x = 0; x < 128; ++x) EXPECT_EQ(denormalize_coord(normalize_coord(x, 128), 128), x);
  EXPECT_EQ(denormalize(1.2, -0.1, ImageDims{128, 128, 3}), (FixationPoint{127, 0}));
  EXPECT_EQ(denormalize_coord(std::nan(""), 128), 0);
}

TEST(M1, AveragePool) {
  Image img(1, 4, 4);
  for (int i = 0; i < 16; ++i) img.data[static_cast<std::size_t>(i)] = static_cast<float>(i);
  const Image p = average_pool(img, {2, 2});
  EXPECT_FLOAT_EQ(p.at(0, 0, 0), (0 + 1 + 4 + 5) / 4.0f);
  EXPECT_FLOAT_EQ(p.at(0, 1, 1), (10 + 11 + 14 + 15) / 4.0f);
  EXPECT_THROW(average_pool(img, {3, 2}), ShapeError);
}

TEST(M1, OverfitSixteenScenes) {
  const auto scenes = generate_scenes(800, 16, SceneDistribution{});
  std::vector<FixationPoint> targets;
  for (const Scene& s : scenes) targets.push_back({(s.bbox_gt.x0 + s.bbox_gt.x1) / 2, (s.bbox_gt.y0 + s.bbox_gt.y1) / 2});
  TrainConfig cfg;
  cfg.epochs = 400;
  cfg.batch_size = 16;
  cfg.hidden = {64, 32};
  cfg.schedule = {1e-3, {300}, 0.1, 0.0};
  cfg.seed = 3;
  const auto r = train_m1(scenes, targets, {16, 16}, cfg);
  const auto pred = predict_fixations(r.model, scenes);
  double err = 0;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    err += std::hypot(pred[i].x - targets[i].x, pred[i].y - targets[i].y);
    EXPECT_TRUE(contains(scenes[i].bbox_gt, pred[i])) << i;
  }
  EXPECT_LT(err / 16, 4.0);
  EXPECT_EQ(hit_rate(pred, scenes), 100.0);

  const auto again = train_m1(scenes, targets, {16, 16}, cfg);
  EXPECT_EQ(again.model.net().fingerprint(), r.model.net().fingerprint());
  EXPECT_EQ(predict_fixation(r.model, scenes[0].image), predict_fixation(r.model, scenes[0].image));
}

TEST(M1, TargetCountMismatchThrows) {
  const auto scenes = generate_scenes(800, 3, SceneDistribution{});
  const std::vector<FixationPoint> two(2);
  EXPECT_THROW(train_m1(scenes, two, {16, 16}, TrainConfig{}), ConfigError);
}

TEST(M1, PropertyPredictionsInBounds) {
  const auto scenes = generate_scenes(900, 40, SceneDistribution{});
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    nn::Mlp net(make_spec(16 * 16 * 3, {8}, {{"xy", 2, nn::OutputMap::Identity}}), seed);
    for (double& p : net.mutable_parameters()) p *= 50.0;  // push outputs far outside [0, 1]
    const M1Model m(net, {16, 16}, ImageDims{128, 128, 3});
    for (const auto& p : predict_fixations(m, scenes)) {
      EXPECT_TRUE(p.x >= 0 && p.x < 128 && p.y >= 0 && p.y < 128);
    }
  }
}

// ------------------------------------------------------------- targets file

TEST(FixationTargetsFile, RoundTripAndErrors) {
  const FixationTargets t{0x1234abcd, {{1, 2}, {30, 40}, {127, 0}}};
  const std::string text = encode_fixation_targets(t);
  const FixationTargets back = decode_fixation_targets(text);
  EXPECT_EQ(back.config_hash, t.config_hash);
  EXPECT_EQ(back.points, t.points);

  std::string wrong_version = text;
  wrong_version.replace(wrong_version.find("v1"), 2, "v9");
  EXPECT_THROW(decode_fixation_targets(wrong_version), VersionError);
  EXPECT_THROW(decode_fixation_targets(text.substr(0, text.rfind('\n', text.size() - 2) + 1)), TruncatedError);
  EXPECT_THROW(decode_fixation_targets("garbage\n"), FormatError);

  const auto path = std::filesystem::path(::testing::TempDir()) / "fovea_targets.txt";
  save_fixation_targets(path, t);
  EXPECT_EQ(load_fixation_targets(path).points, t.points);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace fovea

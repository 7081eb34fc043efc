#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fovea/config.hpp"
#include "fovea/error.hpp"

namespace fovea {
namespace {

TEST(Config, DefaultsAreValid) { EXPECT_NO_THROW(validate(ExperimentConfig{})); }

TEST(Config, IniRoundTrip) {
  ExperimentConfig c;
  c.seed = 77;
  c.dorsal.schedule.start = 3e-4;
  c.ventral.hidden = {64, 32, 16};
  c.rewards.sim_min_satisfactory = 0.25;
  c.scene.palette = Palette::Cool;
  c.dorsal_similarity = SimilaritySourceKind::Learned;
  const std::string text = to_ini(c);
  const ExperimentConfig back = parse_ini(text);
  EXPECT_EQ(back, c);
  EXPECT_EQ(to_ini(back), text);
}

TEST(Config, PartialFileStartsFromDefaults) {
  const auto c = parse_ini("[experiment]\nseed = 5\n\n[dorsal]\nepochs = 3\n");
  ExperimentConfig expected;
  expected.seed = 5;
  expected.dorsal.epochs = 3;
  EXPECT_EQ(c, expected);
}

TEST(Config, UnknownKeysAndSectionsThrow) {
  EXPECT_THROW(parse_ini("[experiment]\nseeed = 5\n"), ConfigError);
  EXPECT_THROW(parse_ini("[nope]\na = 1\n"), ConfigError);
  EXPECT_THROW(parse_ini("[scene]\ncolour = red\n"), ConfigError);
  EXPECT_THROW(parse_ini("[ventral]\nepochs = many\n"), ConfigError);
}

TEST(Config, OverridesApplyAndValidate) {
  const ExperimentConfig c = with_overrides(ExperimentConfig{}, {"dorsal.lr=0.01", "glimpse.num_glimpses=4"});
  EXPECT_EQ(c.dorsal.schedule.start, 0.01);
  EXPECT_EQ(c.glimpse.num_glimpses, 4);
  EXPECT_THROW(with_overrides(ExperimentConfig{}, {"dorsal.lr"}), ConfigError);
  EXPECT_THROW(with_overrides(ExperimentConfig{}, {"dorsal.bogus=1"}), ConfigError);
  EXPECT_THROW(with_overrides(ExperimentConfig{}, {"glimpse.num_glimpses=0"}), ConfigError);
}

TEST(Config, OverlappingSeedRangesAreRefused) {
  ExperimentConfig c;
  c.val.first_seed = c.train.first_seed + static_cast<std::uint64_t>(c.train.count) - 1;
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Config, RewardModeMustMatchExperimentMode) {
  ExperimentConfig c;
  c.rewards.mode = SimilarityMode::ClassConfidence;
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Config, LoadFromFile) {
  const auto path = std::filesystem::path(::testing::TempDir()) / "fovea_cfg.ini";
  std::ofstream(path) << "[experiment]\nseed = 9\n";
  EXPECT_EQ(load_config(path).seed, 9u);
  std::filesystem::remove(path);
  EXPECT_THROW(load_config(path), ConfigError);
}

TEST(LineageHash, LaterPhasesDoNotAffectEarlierOnes) {
  const ExperimentConfig base;
  const ExperimentConfig dorsal_changed = with_overrides(base, {"dorsal.lr=0.005"});
  for (Phase p : {Phase::Data, Phase::Ventral, Phase::M1}) {
    EXPECT_EQ(lineage_hash(base, p), lineage_hash(dorsal_changed, p)) << to_string(p);
  }
  EXPECT_NE(lineage_hash(base, Phase::Dorsal), lineage_hash(dorsal_changed, Phase::Dorsal));
}

TEST(LineageHash, EarlierPhasesPropagate) {
  const ExperimentConfig base;
  const ExperimentConfig ventral_changed = with_overrides(base, {"ventral.epochs=3"});
  EXPECT_EQ(lineage_hash(base, Phase::Data), lineage_hash(ventral_changed, Phase::Data));
  for (Phase p : {Phase::Ventral, Phase::M1}) {
    EXPECT_NE(lineage_hash(base, p), lineage_hash(ventral_changed, p)) << to_string(p);
  }
  const ExperimentConfig data_changed = with_overrides(base, {"data.train_count=100"});
  for (Phase p : {Phase::Data, Phase::Ventral, Phase::M1, Phase::Dorsal}) {
    EXPECT_NE(lineage_hash(base, p), lineage_hash(data_changed, p)) << to_string(p);
  }
}

TEST(LineageHash, OutputDirIsNotPartOfIt) {
  ExperimentConfig a, b;
  b.output_dir = "/elsewhere";
  EXPECT_EQ(lineage_hash(a, Phase::Dorsal), lineage_hash(b, Phase::Dorsal));
}

TEST(PhaseAndSplitNames, RoundTrip) {
  for (Phase p : {Phase::Data, Phase::Ventral, Phase::M1, Phase::Dorsal}) EXPECT_EQ(parse_phase(to_string(p)), p);
  for (Split s : {Split::Train, Split::Val, Split::Test}) EXPECT_EQ(parse_split(to_string(s)), s);
  EXPECT_FALSE(parse_phase("warmup").has_value());
}

}  // namespace
}  // namespace fovea

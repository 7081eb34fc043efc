#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fovea/geometry.hpp"
#include "fovea/rewards.hpp"
#include "fovea/scene.hpp"
#include "fovea/training.hpp"
#include "fovea/ventral.hpp"

namespace fovea {

enum class Phase : std::uint8_t { Data, Ventral, M1, Dorsal };

std::string_view to_string(Phase p) noexcept;
std::optional<Phase> parse_phase(std::string_view s) noexcept;

enum class Split : std::uint8_t { Train, Val, Test };

std::string_view to_string(Split s) noexcept;
std::optional<Split> parse_split(std::string_view s) noexcept;

struct SplitPlan {
  int count = 0;
  std::uint64_t first_seed = 0;  // scenes use seeds [first_seed, first_seed + count)

  bool operator==(const SplitPlan&) const = default;
};

enum class SimilaritySourceKind : std::uint8_t { Analytic, Learned };

/// Everything one experiment needs. Serialized as an INI file with sections
/// [experiment], [scene], [data], [glimpse], [rewards], [ventral], [m1], [dorsal].
struct ExperimentConfig {
  std::uint64_t seed = 1;
  SimilarityMode mode = SimilarityMode::AttributeCosine;
  std::filesystem::path output_dir = "fovea_out";

  SceneDistribution scene;
  SplitPlan train{2000, 1'000'000};
  SplitPlan val{500, 2'000'000};
  SplitPlan test{500, 3'000'000};

  GlimpseConfig glimpse;
  RewardConfig rewards;

  TrainConfig ventral{};
  TrainConfig m1{};
  TrainConfig dorsal{};
  Size2 m1_input{16, 16};
  SimilaritySourceKind dorsal_similarity = SimilaritySourceKind::Analytic;

  ExperimentConfig();

  const SplitPlan& plan(Split s) const;
  /// Training config of a model phase with its seed derived from the experiment seed.
  TrainConfig phase_config(Phase p) const;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Throws ConfigError on inconsistent settings: overlapping split seed ranges,
/// a fixed glimpse size that differs from the model input, a reward mode that
/// differs from the experiment mode, and all per-section checks.
void validate(const ExperimentConfig& cfg);

/// Canonical text: every key, sections and keys in a fixed order.
std::string to_ini(const ExperimentConfig& cfg);
/// Starts from the defaults; unknown sections or keys throw ConfigError.
ExperimentConfig parse_ini(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies "section.key=value" overrides, then validates.
ExperimentConfig with_overrides(const ExperimentConfig& cfg, const std::vector<std::string>& overrides);

/// Environment variable naming the default config file.
inline constexpr const char* kConfigEnvVar = "FOVEA_CONFIG";

/// Hash of exactly the settings that determine a phase's artifacts, including
/// those of every earlier phase it depends on. Changing the dorsal learning rate
/// leaves the ventral hash untouched.
std::uint64_t lineage_hash(const ExperimentConfig& cfg, Phase phase);

}  // namespace fovea

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "fovea/checkpoint.hpp"
#include "fovea/config.hpp"
#include "fovea/dataset.hpp"
#include "fovea/dorsal_init.hpp"
#include "fovea/eval.hpp"
#include "fovea/policy.hpp"
#include "fovea/ventral.hpp"

namespace fovea {

/// Where each artifact of an experiment lives under the output directory.
struct ArtifactPaths {
  std::filesystem::path root;

  std::filesystem::path dataset(Split s) const { return root / "data" / (std::string(to_string(s)) + ".fds"); }
  std::filesystem::path checkpoint(Phase p) const { return root / "models" / (std::string(to_string(p)) + ".ckpt"); }
  std::filesystem::path training_log(Phase p) const { return root / "logs" / (std::string(to_string(p)) + ".log"); }
  std::filesystem::path fixation_targets() const { return root / "models" / "fixation_targets.txt"; }
  std::filesystem::path metrics(Split s) const { return root / "reports" / ("metrics_" + std::string(to_string(s)) + ".json"); }
  std::filesystem::path per_iteration(Split s) const {
    return root / "reports" / ("per_iteration_" + std::string(to_string(s)) + ".csv");
  }
  std::filesystem::path trajectories(Split s) const {
    return root / "reports" / ("trajectories_" + std::string(to_string(s)) + ".jsonl");
  }
  std::filesystem::path rollout_dir(Split s, std::size_t index) const {
    return root / "rollouts" / (std::string(to_string(s)) + "_" + std::to_string(index));
  }
};

using Notice = std::function<void(const std::string&)>;

/// Artifact-backed orchestration of the phases. Every artifact carries the
/// lineage hash of the phase that produced it; loading an artifact whose hash
/// differs from the current configuration throws HashMismatchError.
class Pipeline {
 public:
  explicit Pipeline(ExperimentConfig cfg, Notice notice = {});

  const ExperimentConfig& config() const noexcept { return cfg_; }
  const ArtifactPaths& paths() const noexcept { return paths_; }

  /// Writes all three splits. Throws ConfigError if a file exists and !force.
  void generate(bool force);

  enum class Outcome { Trained, UpToDate };
  /// Throws MissingPrerequisiteError naming the missing phase.
  Outcome train(Phase phase, bool force);

  /// Argmax evaluation; writes the metrics JSON, per-iteration CSV, and trajectory log.
  EvalResult evaluate(Split split);

  struct RolloutOutput {
    Trajectory trajectory;
    std::vector<std::filesystem::path> overlays;
    std::string record;
  };
  /// Argmax rollout of one scene; writes one overlay per state plus the record.
  RolloutOutput rollout(Split split, std::size_t index);

  Dataset load_split(Split s) const;
  VentralModel load_ventral() const;
  M1Model load_m1() const;
  PolicyNet load_policy() const;

 private:
  Checkpoint load_phase_checkpoint(Phase p) const;
  bool up_to_date(Phase p) const;
  void save_model(Phase p, ModelRole role, const nn::Mlp& net, std::map<std::string, std::string> meta) const;
  void say(const std::string& s) const;

  ExperimentConfig cfg_;
  ArtifactPaths paths_;
  Notice notice_;
};

}  // namespace fovea

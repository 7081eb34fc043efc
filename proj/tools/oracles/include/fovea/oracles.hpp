#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fovea/geometry.hpp"
#include "fovea/rewards.hpp"

// Independent reference implementations and the exhaustive suites that compare
// the library against them. Shared by `fovea verify` and the test binaries.
namespace fovea::oracle {

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t failures = 0;
  std::string first_failure;
  double seconds = 0.0;

  bool passed() const noexcept { return cases > 0 && failures == 0; }
};

// ------------------------------------------------------------------- rewards

/// Rule-by-rule interpreter of the reward scheme, written without sharing any
/// code with the library: the running max is folded with an explicit loop and
/// "before the max" means the final max has not yet appeared among S_0..S_t.
std::vector<double> brute_force_rewards(std::span<const double> trace, std::span<const Action> actions,
                                        const RewardConfig& cfg);

/// Plain cumulative max with >= acceptance.
double cumulative_max(std::span<const double> trace);

using RewardFn = std::function<std::vector<double>(std::span<const double>, std::span<const Action>,
                                                   const RewardConfig&)>;

/// Every trace of length 1..max_len over {0, .25, .5, .75, 1} crossed with every
/// action sequence, compared exactly against the interpreter.
SuiteResult reward_equivalence_suite(double threshold, int max_len = 5, const RewardFn& impl = assign_rewards);

/// Random traces folded with update_max_similarity at th = 0 versus cumulative_max.
SuiteResult cumulative_max_suite(int folds, std::uint64_t seed);

// ------------------------------------------------------------------ gradients

enum class GradLoss { Mse, Bce, SoftmaxCe, Reinforce };

std::string_view to_string(GradLoss l) noexcept;

/// Random networks (2 or 3 layers, widths <= 64) checked against central
/// differences for one loss.
SuiteResult gradient_suite(GradLoss loss, int models, std::uint64_t seed, double tolerance = 1e-5);

// ------------------------------------------------------------------- geometry

/// All rects on an 8x8 grid: IoU against pixel counting for every pair, and
/// containment, stop idempotence, and clamping for every action and step.
SuiteResult geometry_suite(int grid = 8);

// ------------------------------------------------------------------ similarity

/// Random scenes and expand-only action sequences; the analytic attribute
/// cosine must never decrease.
SuiteResult monotonicity_suite(int scenes, std::uint64_t seed);

}  // namespace fovea::oracle

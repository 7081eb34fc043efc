#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <string>
#include <vector>

#include "fovea/neural.hpp"

namespace fovea {

/// Hyperparameters shared by every supervised or RL training phase.
struct TrainConfig {
  int epochs = 30;
  int batch_size = 64;
  nn::LrSchedule schedule{1e-3, {20, 26}, 0.1, 1e-5};
  nn::OptimizerConfig optimizer{};
  std::vector<int> hidden{256, 128};
  std::uint64_t seed = 1;

  bool operator==(const TrainConfig&) const = default;
};

void validate(const TrainConfig& cfg);

/// One log line per epoch.
struct EpochRecord {
  std::string phase;
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  std::optional<double> mean_reward;
  std::optional<double> mean_iou;
  std::optional<double> mean_similarity;

  /// logfmt, e.g. "phase=dorsal epoch=3 lr=0.001 loss=0.41 mean_reward=2.5 mean_iou=0.61"
  std::string to_line() const;
};

/// Hidden layers (all relu) followed by the given heads.
nn::MlpSpec make_spec(int input_width, const std::vector<int>& hidden, std::vector<nn::HeadSpec> heads);

}  // namespace fovea

namespace fovea {

/// Loss over the rows `rows` of the training inputs, given their logits.
using BatchLoss = std::function<nn::LossResult(const nn::Matrix& logits, std::span<const std::size_t> rows)>;

/// Minibatch training with per-epoch shuffling (seeded from cfg.seed), the
/// configured optimizer, and the learning-rate schedule. Throws TrainingError
/// on a non-finite loss, naming the phase, epoch, and batch.
std::vector<EpochRecord> fit_supervised(nn::Mlp& net, const nn::Matrix& inputs, const BatchLoss& loss,
                                        const TrainConfig& cfg, std::string_view phase);

}  // namespace fovea

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fovea::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint8_t { Relu, Identity };
enum class OutputMap : std::uint8_t { Identity, Sigmoid, Softmax };

struct HeadSpec {
  std::string name;
  int width = 0;
  OutputMap map = OutputMap::Identity;

  bool operator==(const HeadSpec&) const = default;
};

/// widths = {input, hidden..., output}; the output layer is linear and is split
/// left to right into heads whose widths sum to widths.back().
struct MlpSpec {
  std::vector<int> widths;
  std::vector<Activation> hidden;  // one per hidden layer
  std::vector<HeadSpec> heads;

  bool operator==(const MlpSpec&) const = default;
};

void validate(const MlpSpec& spec);

struct ForwardCache {
  std::uint64_t version = 0;
  std::vector<Matrix> pre;      // pre-activation of each layer
  std::vector<Matrix> act;      // act[0] is the input; act[l + 1] is layer l's output
  std::vector<Matrix> outputs;  // per head, after its output map

  const Matrix& logits() const { return act.back(); }
  Eigen::Index rows() const { return act.front().rows(); }
};

struct Gradients {
  std::vector<double> params;  // same layout as Mlp::parameters()
  Matrix input;                // d loss / d input, filled only when requested
};

/// Fully connected network over float64. Parameters live in one flat buffer
/// (per layer: row-major weights [out x in], then biases [out]) so optimizers,
/// checkpoints, and fingerprints operate on a single span.
///
/// Forward passes run in fixed 64-row chunks, so a sample's outputs do not
/// depend on which other samples share its batch.
class Mlp {
 public:
  static constexpr Eigen::Index kChunkRows = 64;

  Mlp() = default;
  /// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  Mlp(MlpSpec spec, std::uint64_t seed);

  const MlpSpec& spec() const noexcept { return spec_; }
  int input_width() const noexcept { return spec_.widths.front(); }
  int output_width() const noexcept { return spec_.widths.back(); }
  int num_layers() const noexcept { return static_cast<int>(spec_.widths.size()) - 1; }

  int head_index(std::string_view name) const;
  int head_offset(int head) const;
  const HeadSpec& head(int h) const { return spec_.heads[static_cast<std::size_t>(h)]; }

  std::span<const double> parameters() const noexcept { return params_; }
  /// Any mutable access invalidates outstanding forward caches.
  std::span<double> mutable_parameters() noexcept;
  void set_parameters(std::span<const double> values);

  Eigen::Map<const Matrix> weight(int layer) const;
  Eigen::Map<const Vector> bias(int layer) const;
  Eigen::Map<Matrix> mutable_weight(int layer);
  Eigen::Map<Vector> mutable_bias(int layer);

  ForwardCache forward(const Matrix& batch) const;

  /// Reverse-mode gradients given d loss / d logits (the pre-map output layer).
  /// Throws Error if the cache was produced by a different parameter state.
  Gradients backward(const ForwardCache& cache, const Matrix& d_logits, bool want_input_grad = false) const;

  std::uint64_t version() const noexcept { return version_; }
  /// Hash of the architecture and the exact parameter bits.
  std::uint64_t fingerprint() const;

 private:
  std::size_t weight_offset(int layer) const { return offsets_[static_cast<std::size_t>(layer)]; }
  void touch() noexcept;

  MlpSpec spec_;
  std::vector<double> params_;
  std::vector<std::size_t> offsets_;
  std::uint64_t version_ = 0;
};

/// Applies each head's output map to the corresponding logits.
std::vector<Matrix> apply_heads(const MlpSpec& spec, const Matrix& logits);

Matrix softmax_rows(const Matrix& logits);
Matrix log_softmax_rows(const Matrix& logits);
Matrix sigmoid(const Matrix& logits);

// -------------------------------------------------------------------- losses

enum class LossKind : std::uint8_t { Mse, BcePerOutput, CeSoftmax };

struct LossResult {
  double value = 0.0;
  Matrix grad;  // d value / d inputs of the loss (same shape)
};

/// Mean over all elements of (y - t)^2.
LossResult mse_loss(const Matrix& outputs, const Matrix& targets);
/// Mean over all elements of the binary cross-entropy of sigmoid(logits); targets in {0, 1}.
LossResult bce_loss(const Matrix& logits, const Matrix& targets);
/// Mean over rows of -log softmax(logits)[class].
LossResult softmax_ce_loss(const Matrix& logits, std::span<const int> classes);

/// Dispatch by kind; for CeSoftmax, `targets` is a column of class indices.
LossResult compute_loss(LossKind kind, const Matrix& logits, const Matrix& targets);

// ---------------------------------------------------------------- optimizers

enum class OptimizerKind : std::uint8_t { Adam, Sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double momentum = 0.9;
  /// Coupled: added to the gradient as weight_decay * param before the update.
  double weight_decay = 0.0;

  bool operator==(const OptimizerConfig&) const = default;
};

struct OptimizerState {
  OptimizerConfig config;
  std::int64_t step = 0;
  std::vector<double> first;   // Adam m, or SGD velocity
  std::vector<double> second;  // Adam v

  explicit OptimizerState(OptimizerConfig cfg = {}, std::size_t n = 0);
};

/// One update with learning rate `lr`. Rejects (throws TrainingError, leaving
/// params and state untouched) when any gradient is non-finite.
void optimizer_step(OptimizerState& state, std::span<double> params, std::span<const double> grads, double lr);

struct LrSchedule {
  double start = 1e-3;
  std::vector<int> milestones;
  double factor = 0.1;
  double floor = 0.0;

  bool operator==(const LrSchedule&) const = default;
};

void validate(const LrSchedule& s);

/// start * factor^(milestones <= epoch), never below floor.
double lr_at(const LrSchedule& s, int epoch);

// ------------------------------------------------------------ gradient check

using LossFn = std::function<LossResult(const Matrix& logits)>;
using AnalyticGradFn = std::function<std::vector<double>(const Mlp&, const Matrix& batch, const LossFn&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  std::vector<double> per_layer_max;  // [w0, b0, w1, b1, ...]
  std::size_t checked = 0;
  bool passed = false;
};

/// Floor on the relative-error denominator. Central differences at h = 1e-5 carry
/// roundoff near 2e-11 * |loss| (~1e-10 for losses around 5), so entries with a
/// true gradient below the floor are judged on absolute error instead.
inline constexpr double kGradCheckDenominatorFloor = 1e-4;

/// Standard reverse-mode gradient of loss(forward(batch)).
std::vector<double> analytic_gradient(const Mlp& model, const Matrix& batch, const LossFn& loss);

/// Compares the analytic gradient against central differences with step h.
/// relative error = |a - n| / max(|a|, |n|, kGradCheckDenominatorFloor).
GradCheckReport grad_check(const Mlp& model, const LossFn& loss, const Matrix& batch, double tolerance,
                           double h = 1e-5, const AnalyticGradFn& analytic = analytic_gradient);

GradCheckReport grad_check(const Mlp& model, LossKind kind, const Matrix& batch, const Matrix& targets,
                           double tolerance);

}  // namespace fovea::nn

#include "fovea/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fovea/error.hpp"
#include "fovea/rng.hpp"
#include "text_util.hpp"

namespace fovea {

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.hidden.empty()) throw ConfigError("at least one hidden layer is required");
  nn::validate(cfg.schedule);
}

std::string EpochRecord::to_line() const {
  std::ostringstream os;
  os << "phase=" << phase << " epoch=" << epoch << " lr=" << detail::format_double(lr)
     << " loss=" << detail::format_double(loss);
  if (mean_reward) os << " mean_reward=" << detail::format_double(*mean_reward);
  if (mean_iou) os << " mean_iou=" << detail::format_double(*mean_iou);
  if (mean_similarity) os << " mean_similarity=" << detail::format_double(*mean_similarity);
  return os.str();
}

nn::MlpSpec make_spec(int input_width, const std::vector<int>& hidden, std::vector<nn::HeadSpec> heads) {
  nn::MlpSpec spec;
  spec.widths.push_back(input_width);
  for (int h : hidden) spec.widths.push_back(h);
  int out = 0;
  for (const auto& h : heads) out += h.width;
  spec.widths.push_back(out);
  spec.hidden.assign(hidden.size(), nn::Activation::Relu);
  spec.heads = std::move(heads);
  return spec;
}

std::vector<EpochRecord> fit_supervised(nn::Mlp& net, const nn::Matrix& inputs, const BatchLoss& loss,
                                        const TrainConfig& cfg, std::string_view phase) {
  validate(cfg);
  const auto n = static_cast<std::size_t>(inputs.rows());
  if (n == 0) throw ConfigError(std::string(phase) + ": empty training set");

  nn::OptimizerState opt(cfg.optimizer, net.parameters().size());
  std::vector<std::size_t> order(n);
  std::vector<EpochRecord> log;
  nn::Matrix batch;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_stream({cfg.seed, static_cast<std::uint64_t>(epoch), 0x5bff1e});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

    const double lr = nn::lr_at(cfg.schedule, epoch);
    double total = 0.0;
    int b = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size), ++b) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      std::span<const std::size_t> rows(order.data() + start, end - start);
      batch.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        batch.row(static_cast<Eigen::Index>(r)) = inputs.row(static_cast<Eigen::Index>(rows[r]));
      }
      const auto cache = net.forward(batch);
      const auto res = loss(cache.logits(), rows);
      if (!std::isfinite(res.value)) {
        throw TrainingError(std::string(phase) + ": non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                            std::to_string(b) + " (lr=" + detail::format_double(lr) + ")");
      }
      const auto grads = net.backward(cache, res.grad);
      nn::optimizer_step(opt, net.mutable_parameters(), grads.params, lr);
      total += res.value * static_cast<double>(rows.size());
    }
    log.push_back({std::string(phase), epoch, lr, total / static_cast<double>(n), {}, {}, {}});
  }
  return log;
}

}  // namespace fovea

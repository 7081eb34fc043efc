#include "fovea/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "fovea/error.hpp"
#include "fovea/rng.hpp"

namespace fovea {

namespace {

constexpr int kBaselineColumn = kNumActions;

void check_policy_net(const nn::Mlp& net, Size2 input_size, int channels) {
  const auto& heads = net.spec().heads;
  if (heads.size() != 2 || heads[0].width != kNumActions || heads[1].width != 1) {
    throw ShapeError("policy network must have an action head of width 5 followed by a baseline head of width 1");
  }
  if (net.input_width() != input_size.width * input_size.height * channels) {
    throw ShapeError("policy network input width does not match the glimpse size");
  }
}

}  // namespace

PolicyNet::PolicyNet(Size2 input_size, int channels, const std::vector<int>& hidden, std::uint64_t seed)
    : net_(make_spec(input_size.width * input_size.height * channels, hidden,
                     {{kActionHead, kNumActions, nn::OutputMap::Softmax}, {kBaselineHead, 1, nn::OutputMap::Identity}}),
           seed),
      input_size_(input_size),
      channels_(channels) {}

PolicyNet::PolicyNet(nn::Mlp net, Size2 input_size, int channels)
    : net_(std::move(net)), input_size_(input_size), channels_(channels) {
  check_policy_net(net_, input_size_, channels_);
}

SimilaritySource SimilaritySource::analytic(SimilarityMode mode) {
  SimilaritySource s;
  s.mode_ = mode;
  return s;
}

SimilaritySource SimilaritySource::learned(const VentralModel& ventral) {
  SimilaritySource s;
  s.mode_ = ventral.mode();
  s.ventral_ = &ventral;
  return s;
}

double SimilaritySource::operator()(const Scene& scene, const Patch& patch) const {
  if (!ventral_) return analytic_similarity(scene, patch.source_rect, mode_);
  return learned_similarity(*ventral_, patch, mode_, target_of(scene, mode_));
}

double Trajectory::total_reward() const noexcept { return std::accumulate(rewards.begin(), rewards.end(), 0.0); }

namespace {

void score_step(const SimilaritySource& sim, std::span<const RolloutRequest> requests, std::span<const Patch> patches,
                std::vector<Trajectory>& out) {
  for (std::size_t i = 0; i < requests.size(); ++i) out[i].similarities.push_back(sim(*requests[i].scene, patches[i]));
}

int sample_index(std::span<const double> log_probs, Rng& rng) {
  const double u = uniform01(rng);
  double cum = 0.0;
  for (std::size_t i = 0; i < log_probs.size(); ++i) {
    cum += std::exp(log_probs[i]);
    if (u < cum) return static_cast<int>(i);
  }
  return static_cast<int>(log_probs.size()) - 1;
}

}  // namespace

std::vector<Trajectory> collect_trajectories(const PolicyNet& policy, std::span<const RolloutRequest> requests,
                                             const GlimpseConfig& glimpse, const RolloutOptions& options) {
  validate(glimpse);
  if (glimpse.fixed_size != policy.input_size()) {
    throw ConfigError("glimpse fixed_size does not match the policy input size");
  }
  if (options.rewards && !options.similarity) throw ConfigError("rewards need a similarity source");
  const std::size_t B = requests.size();
  const int N = glimpse.num_glimpses;
  std::vector<Trajectory> out(B);
  std::vector<Rng> rngs;
  rngs.reserve(B);
  for (std::size_t i = 0; i < B; ++i) {
    const auto& rq = requests[i];
    if (!rq.scene) throw ConfigError("rollout request without a scene");
    auto& tr = out[i];
    tr.scene_id = rq.scene_id;
    tr.seed = options.mode == RolloutMode::Sample ? rq.seed : 0;
    tr.fixation = rq.fixation;
    tr.rects.reserve(static_cast<std::size_t>(N) + 1);
    tr.rects.push_back(initial_glimpse(rq.fixation, glimpse.init_size, rq.scene->image.dims()));
    if (options.keep_inputs) tr.inputs.resize(N, policy.net().input_width());
    rngs.push_back(make_stream({tr.seed}));
  }

  std::vector<Patch> patches(B);
  nn::Matrix x(static_cast<Eigen::Index>(B), policy.net().input_width());
  for (int t = 0; t <= N; ++t) {
    for (std::size_t i = 0; i < B; ++i) {
      patches[i] = extract_glimpse(requests[i].scene->image, out[i].rects.back(), glimpse.fixed_size);
    }
    if (options.similarity) score_step(*options.similarity, requests, patches, out);
    if (t == N) break;

    for (std::size_t i = 0; i < B; ++i) flatten_into(patches[i].pixels, x, static_cast<Eigen::Index>(i));
    const auto cache = policy.net().forward(x);
    const nn::Matrix logp = nn::log_softmax_rows(cache.logits().leftCols(kNumActions));
    for (std::size_t i = 0; i < B; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      auto& tr = out[i];
      int a = 0;
      if (options.mode == RolloutMode::Argmax) {
        for (int k = 1; k < kNumActions; ++k) {
          if (logp(r, k) > logp(r, a)) a = k;
        }
      } else {
        std::array<double, kNumActions> lp{};
        for (int k = 0; k < kNumActions; ++k) lp[static_cast<std::size_t>(k)] = logp(r, k);
        a = sample_index(lp, rngs[i]);
      }
      const Action action = action_from_index(a);
      tr.actions.push_back(action);
      tr.log_probs.push_back(logp(r, a));
      tr.baselines.push_back(cache.logits()(r, kBaselineColumn));
      if (options.keep_inputs) tr.inputs.row(t) = x.row(r);
      tr.rects.push_back(apply_action(tr.rects.back(), action, glimpse.step, requests[i].scene->image.dims()));
    }
  }
  if (options.rewards) {
    for (auto& tr : out) score_trajectory(tr, *options.rewards);
  }
  return out;
}

Trajectory collect_trajectory(const Scene& scene, std::uint64_t scene_id, const PolicyNet& policy,
                              const GlimpseConfig& glimpse, FixationPoint fixation, const RolloutOptions& options,
                              std::uint64_t seed) {
  const RolloutRequest rq{&scene, scene_id, fixation, seed};
  return std::move(collect_trajectories(policy, std::span(&rq, 1), glimpse, options).front());
}

void score_trajectory(Trajectory& traj, const RewardConfig& cfg) {
  traj.rewards = assign_rewards(traj.similarities, traj.actions, cfg);
  auto ra = returns_and_advantages(traj.rewards, traj.baselines);
  traj.returns = std::move(ra.returns);
  traj.advantages = std::move(ra.advantages);
}

nn::LossResult reinforce_loss(const nn::Matrix& logits, std::span<const int> actions,
                              std::span<const double> advantages, std::span<const double> returns,
                              double baseline_weight) {
  const auto M = static_cast<std::size_t>(logits.rows());
  if (logits.cols() != kNumActions + 1) throw ShapeError("reinforce_loss: expected 6 logit columns");
  if (actions.size() != M || advantages.size() != M || returns.size() != M) {
    throw ShapeError("reinforce_loss: per-row inputs must match the number of logit rows");
  }
  if (M == 0) throw ShapeError("reinforce_loss: empty batch");
  const nn::Matrix logp = nn::log_softmax_rows(logits.leftCols(kNumActions));
  const double inv = 1.0 / static_cast<double>(M);

  nn::LossResult res;
  res.grad = nn::Matrix::Zero(logits.rows(), logits.cols());
  double pg = 0.0, bl = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const int a = actions[i];
    if (a < 0 || a >= kNumActions) throw ShapeError("reinforce_loss: action index out of range");
    pg -= logp(r, a) * advantages[i];
    for (int k = 0; k < kNumActions; ++k) {
      const double p = std::exp(logp(r, k));
      res.grad(r, k) = -advantages[i] * inv * ((k == a ? 1.0 : 0.0) - p);
    }
    const double diff = logits(r, kBaselineColumn) - returns[i];
    bl += diff * diff;
    res.grad(r, kBaselineColumn) = baseline_weight * 2.0 * diff * inv;
  }
  res.value = pg * inv + baseline_weight * bl * inv;
  return res;
}

UpdateStats reinforce_update(PolicyNet& policy, nn::OptimizerState& optimizer, std::span<const Trajectory> batch,
                             double lr, double baseline_weight) {
  std::size_t M = 0;
  for (const auto& tr : batch) {
    if (tr.inputs.rows() != static_cast<Eigen::Index>(tr.actions.size())) {
      throw ConfigError("reinforce_update needs trajectories collected with keep_inputs");
    }
    if (tr.advantages.size() != tr.actions.size()) throw ConfigError("reinforce_update needs scored trajectories");
    M += tr.actions.size();
  }
  if (M == 0) throw ConfigError("reinforce_update: empty batch");

  nn::Matrix x(static_cast<Eigen::Index>(M), policy.net().input_width());
  std::vector<int> actions;
  std::vector<double> adv, ret;
  actions.reserve(M);
  adv.reserve(M);
  ret.reserve(M);
  Eigen::Index row = 0;
  for (const auto& tr : batch) {
    x.middleRows(row, tr.inputs.rows()) = tr.inputs;
    row += tr.inputs.rows();
    for (std::size_t t = 0; t < tr.actions.size(); ++t) {
      actions.push_back(index_of(tr.actions[t]));
      adv.push_back(tr.advantages[t]);
      ret.push_back(tr.returns[t]);
    }
  }

  const auto cache = policy.net().forward(x);
  const auto loss = reinforce_loss(cache.logits(), actions, adv, ret, baseline_weight);
  if (!std::isfinite(loss.value)) throw TrainingError("reinforce_update: non-finite loss; update rejected");

  UpdateStats stats;
  stats.loss = loss.value;
  stats.samples = M;
  for (std::size_t i = 0; i < M; ++i) {
    const double d = cache.logits()(static_cast<Eigen::Index>(i), kBaselineColumn) - ret[i];
    stats.baseline_loss += d * d / static_cast<double>(M);
  }
  stats.policy_loss = loss.value - baseline_weight * stats.baseline_loss;

  const auto grads = policy.net().backward(cache, loss.grad);
  nn::optimizer_step(optimizer, policy.mutable_net().mutable_parameters(), grads.params, lr);
  return stats;
}

DorsalTrainResult train_dorsal(PolicyNet& policy, const DorsalTrainInputs& in, const TrainConfig& cfg,
                               const EpochCallback& on_epoch) {
  validate(cfg);
  validate(in.rewards);
  if (!in.similarity) throw ConfigError("train_dorsal needs a similarity source");
  if (in.scenes.empty()) throw ConfigError("train_dorsal: empty dataset");
  if (in.fixations.size() != in.scenes.size()) throw ConfigError("train_dorsal: one fixation per scene is required");

  const std::size_t n = in.scenes.size();
  nn::OptimizerState opt(cfg.optimizer, policy.net().parameters().size());
  RolloutOptions ro;
  ro.mode = RolloutMode::Sample;
  ro.similarity = in.similarity;
  ro.rewards = &in.rewards;
  ro.keep_inputs = true;

  DorsalTrainResult result;
  std::vector<std::size_t> order(n);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = make_stream({cfg.seed, static_cast<std::uint64_t>(epoch), 0xd025a1});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle() % i]);

    const double lr = nn::lr_at(cfg.schedule, epoch);
    double reward = 0.0, final_iou = 0.0, final_sim = 0.0, loss = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<RolloutRequest> reqs;
      reqs.reserve(end - start);
      for (std::size_t j = start; j < end; ++j) {
        const std::size_t s = order[j];
        reqs.push_back({&in.scenes[s], s, in.fixations[s], derive_seed({cfg.seed, s, static_cast<std::uint64_t>(epoch)})});
      }
      const auto trajs = collect_trajectories(policy, reqs, in.glimpse, ro);
      for (std::size_t j = 0; j < trajs.size(); ++j) {
        reward += trajs[j].total_reward();
        final_iou += iou(trajs[j].rects.back(), reqs[j].scene->bbox_gt);
        final_sim += trajs[j].similarities.back();
      }
      const auto stats = reinforce_update(policy, opt, trajs, lr);
      loss += stats.loss * static_cast<double>(trajs.size());
    }
    const double dn = static_cast<double>(n);
    EpochRecord rec{"dorsal", epoch, lr, loss / dn, reward / dn, final_iou / dn, final_sim / dn};
    if (!std::isfinite(reward / dn)) {
      throw TrainingError("dorsal: mean reward is not finite at epoch " + std::to_string(epoch));
    }
    result.log.push_back(rec);
    if (on_epoch) on_epoch(policy, rec);
  }
  return result;
}

std::string trajectory_record(const Trajectory& traj) {
  nlohmann::ordered_json j;
  j["scene"] = traj.scene_id;
  j["seed"] = traj.seed;
  j["fixation"] = {traj.fixation.x, traj.fixation.y};
  auto rects = nlohmann::ordered_json::array();
  for (const auto& r : traj.rects) rects.push_back(r.to_array());
  j["rects"] = std::move(rects);
  auto actions = nlohmann::ordered_json::array();
  for (auto a : traj.actions) actions.push_back(std::string(to_string(a)));
  j["actions"] = std::move(actions);
  j["similarities"] = traj.similarities;
  j["rewards"] = traj.rewards;
  j["returns"] = traj.returns;
  return j.dump();
}

}  // namespace fovea

#include "fovea/oracles.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <sstream>

#include "fovea/error.hpp"
#include "fovea/neural.hpp"
#include "fovea/policy.hpp"
#include "fovea/rng.hpp"
#include "fovea/scene.hpp"
#include "fovea/ventral.hpp"

namespace fovea::oracle {

namespace {

class Timer {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void record_failure(SuiteResult& r, const std::string& what) {
  if (r.failures++ == 0) r.first_failure = what;
}

template <typename T>
std::string list(std::span<const T> xs) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << xs[i];
  os << ']';
  return os.str();
}

}  // namespace

// ------------------------------------------------------------------- rewards

std::vector<double> brute_force_rewards(std::span<const double> trace, std::span<const Action> actions,
                                        const RewardConfig& cfg) {
  double best = trace[0];
  for (std::size_t i = 1; i < trace.size(); ++i) {
    const double s = trace[i];
    bool accept;
    if (cfg.sim_change_th == 0.0) accept = s >= best;
    else if (best <= 0.0) accept = s > best;
    else accept = (s - best) / best >= cfg.sim_change_th;
    if (accept) best = s;
  }

  std::vector<double> out;
  for (std::size_t t = 0; t < actions.size(); ++t) {
    if (cfg.sim_min_satisfactory && best < *cfg.sim_min_satisfactory) {
      out.push_back(cfg.trajectory_fail_reward);
      continue;
    }
    const bool max_seen = std::find(trace.begin(), trace.begin() + static_cast<std::ptrdiff_t>(t) + 1, best) !=
                          trace.begin() + static_cast<std::ptrdiff_t>(t) + 1;
    const bool stop = actions[t] == Action::Stop;
    double r;
    if (max_seen) r = stop ? cfg.r_stop_after_max : cfg.r_action_after_max;
    else if (stop) r = cfg.r_premature_stop;
    else if (trace[t + 1] > trace[t]) r = cfg.r_improve;
    else r = cfg.r_degrade;
    out.push_back(r);
  }
  return out;
}

double cumulative_max(std::span<const double> trace) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : trace) m = std::max(m, v);
  return m;
}

SuiteResult reward_equivalence_suite(double threshold, int max_len, const RewardFn& impl) {
  static constexpr std::array<double, 5> kGrid = {0.0, 0.25, 0.5, 0.75, 1.0};
  Timer timer;
  SuiteResult r;
  r.name = "reward_rules_th_" + std::to_string(threshold).substr(0, 4);

  // Both the plain and the fail-penalty variants are covered.
  std::vector<RewardConfig> cfgs(2);
  for (auto& c : cfgs) c.sim_change_th = threshold;
  cfgs[1].sim_min_satisfactory = 0.5;

  std::vector<double> trace;
  std::vector<Action> actions;
  for (int len = 1; len <= max_len; ++len) {
    std::size_t n_traces = 1, n_actions = 1;
    for (int i = 0; i < len; ++i) n_traces *= kGrid.size();
    for (int i = 0; i + 1 < len; ++i) n_actions *= kNumActions;
    trace.assign(static_cast<std::size_t>(len), 0.0);
    actions.assign(static_cast<std::size_t>(len - 1), Action::Stop);
    for (std::size_t ti = 0; ti < n_traces; ++ti) {
      for (std::size_t k = 0, code = ti; k < trace.size(); ++k, code /= kGrid.size()) trace[k] = kGrid[code % kGrid.size()];
      for (std::size_t ai = 0; ai < n_actions; ++ai) {
        for (std::size_t k = 0, code = ai; k < actions.size(); ++k, code /= kNumActions) {
          actions[k] = action_from_index(static_cast<int>(code % kNumActions));
        }
        for (const auto& cfg : cfgs) {
          ++r.cases;
          const auto got = impl(trace, actions, cfg);
          const auto want = brute_force_rewards(trace, actions, cfg);
          if (got != want) {
            record_failure(r, "trace " + list<double>(trace) + " rewards " + list<double>(got) + " expected " +
                                  list<double>(want));
          }
        }
      }
    }
  }
  r.seconds = timer.seconds();
  return r;
}

SuiteResult cumulative_max_suite(int folds, std::uint64_t seed) {
  Timer timer;
  SuiteResult r;
  r.name = "max_similarity_fold";
  Rng rng = make_stream({seed, 0xf01d});
  for (int f = 0; f < folds; ++f) {
    std::vector<double> trace(static_cast<std::size_t>(uniform_int(rng, 1, 20)));
    // Coarse values make ties, the interesting case for >= acceptance, common.
    for (double& v : trace) v = uniform_int(rng, 0, 8) / 8.0 + (uniform01(rng) < 0.5 ? 0.0 : uniform01(rng) / 64);
    double m = trace.front();
    for (std::size_t t = 1; t < trace.size(); ++t) m = update_max_similarity(m, trace[t], 0.0);
    ++r.cases;
    if (m != cumulative_max(trace)) record_failure(r, "trace " + list<double>(trace));
  }
  r.seconds = timer.seconds();
  return r;
}

// ------------------------------------------------------------------ gradients

std::string_view to_string(GradLoss l) noexcept {
  switch (l) {
    case GradLoss::Mse: return "mse";
    case GradLoss::Bce: return "bce";
    case GradLoss::SoftmaxCe: return "softmax_ce";
    case GradLoss::Reinforce: return "reinforce";
  }
  return "?";
}

namespace {

// Smallest |pre-activation| over the hidden layers; finite differences are only
// meaningful away from ReLU kinks.
double kink_margin(const nn::Mlp& net, const nn::Matrix& batch) {
  const auto cache = net.forward(batch);
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l + 1 < cache.pre.size(); ++l) m = std::min(m, cache.pre[l].cwiseAbs().minCoeff());
  return m;
}

}  // namespace

SuiteResult gradient_suite(GradLoss loss, int models, std::uint64_t seed, double tolerance) {
  Timer timer;
  SuiteResult r;
  r.name = "gradients_" + std::string(to_string(loss));
  double worst = 0.0;
  for (int m = 0; m < models; ++m) {
    Rng rng = make_stream({seed, static_cast<std::uint64_t>(loss), static_cast<std::uint64_t>(m)});
    const int layers = uniform_int(rng, 2, 3);
    const int in = uniform_int(rng, 2, 64);
    int out = 0;
    switch (loss) {
      case GradLoss::Mse:
      case GradLoss::Bce: out = uniform_int(rng, 1, 64); break;
      case GradLoss::SoftmaxCe: out = uniform_int(rng, 2, 64); break;
      case GradLoss::Reinforce: out = kNumActions + 1; break;
    }
    std::vector<int> hidden;
    for (int l = 1; l < layers; ++l) hidden.push_back(uniform_int(rng, 2, 64));
    std::vector<nn::HeadSpec> heads{{"out", out, nn::OutputMap::Identity}};
    if (loss == GradLoss::Reinforce) {
      heads = {{"action", kNumActions, nn::OutputMap::Softmax}, {"baseline", 1, nn::OutputMap::Identity}};
    }
    nn::MlpSpec spec;
    spec.widths.push_back(in);
    for (int h : hidden) spec.widths.push_back(h);
    spec.widths.push_back(out);
    spec.hidden.assign(hidden.size(), nn::Activation::Relu);
    spec.heads = heads;
    nn::Mlp net(spec, rng());
    for (double& p : net.mutable_parameters()) p += uniform(rng, -0.05, 0.05);

    const int rows = uniform_int(rng, 1, 6);
    nn::Matrix batch(rows, in);
    for (int attempt = 0;; ++attempt) {
      for (Eigen::Index i = 0; i < batch.size(); ++i) batch.data()[i] = uniform(rng, -1.0, 1.0);
      if (kink_margin(net, batch) > 1e-3 || attempt > 1000) break;
    }

    nn::LossFn fn;
    if (loss == GradLoss::Mse || loss == GradLoss::Bce) {
      nn::Matrix t(rows, out);
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        t.data()[i] = loss == GradLoss::Mse ? uniform(rng, -1.0, 1.0) : static_cast<double>(uniform_int(rng, 0, 1));
      }
      if (loss == GradLoss::Mse) fn = [t](const nn::Matrix& y) { return nn::mse_loss(y, t); };
      else fn = [t](const nn::Matrix& z) { return nn::bce_loss(z, t); };
    } else if (loss == GradLoss::SoftmaxCe) {
      std::vector<int> cls(static_cast<std::size_t>(rows));
      for (int& c : cls) c = uniform_int(rng, 0, out - 1);
      fn = [cls](const nn::Matrix& z) { return nn::softmax_ce_loss(z, cls); };
    } else {
      std::vector<int> acts(static_cast<std::size_t>(rows));
      std::vector<double> adv(acts.size()), ret(acts.size());
      for (std::size_t i = 0; i < acts.size(); ++i) {
        acts[i] = uniform_int(rng, 0, kNumActions - 1);
        adv[i] = uniform(rng, -2.0, 2.0);
        ret[i] = uniform(rng, -3.0, 3.0);
      }
      fn = [acts, adv, ret](const nn::Matrix& z) { return reinforce_loss(z, acts, adv, ret); };
    }

    const auto rep = nn::grad_check(net, fn, batch, tolerance);
    r.cases += rep.checked;
    worst = std::max(worst, rep.max_rel_error);
    if (!rep.passed) {
      ++r.failures;
      if (r.first_failure.empty()) {
        r.first_failure = "model " + std::to_string(m) + ": relative error " + std::to_string(rep.max_rel_error) +
                          " at parameter " + std::to_string(rep.worst_index);
      }
    }
  }
  if (r.failures == 0) {
    std::ostringstream os;
    os << "max relative error " << worst;
    r.first_failure = os.str();
  }
  r.seconds = timer.seconds();
  return r;
}

// ------------------------------------------------------------------- geometry

SuiteResult geometry_suite(int grid) {
  Timer timer;
  SuiteResult r;
  r.name = "geometry_exhaustive";
  const ImageDims dims{grid, grid, 1};
  std::vector<Rect> rects;
  for (int x0 = 0; x0 < grid; ++x0)
    for (int x1 = x0 + 1; x1 <= grid; ++x1)
      for (int y0 = 0; y0 < grid; ++y0)
        for (int y1 = y0 + 1; y1 <= grid; ++y1) rects.push_back({x0, y0, x1, y1});

  const auto describe = [](const Rect& a) {
    return "(" + std::to_string(a.x0) + "," + std::to_string(a.y0) + "," + std::to_string(a.x1) + "," +
           std::to_string(a.y1) + ")";
  };

  // IoU against pixel counting.
  std::vector<std::uint64_t> masks;
  for (const auto& a : rects) {
    std::uint64_t m = 0;
    for (int y = a.y0; y < a.y1; ++y)
      for (int x = a.x0; x < a.x1; ++x) m |= std::uint64_t{1} << (y * grid + x);
    masks.push_back(m);
  }
  const bool bitmask = grid * grid <= 64;
  for (std::size_t i = 0; i < rects.size(); ++i) {
    for (std::size_t j = 0; j < rects.size(); ++j) {
      std::int64_t inter = 0, uni = 0;
      if (bitmask) {
        inter = std::popcount(masks[i] & masks[j]);
        uni = std::popcount(masks[i] | masks[j]);
      } else {
        for (int y = 0; y < grid; ++y)
          for (int x = 0; x < grid; ++x) {
            const bool a = contains(rects[i], FixationPoint{x, y}), b = contains(rects[j], FixationPoint{x, y});
            inter += a && b;
            uni += a || b;
          }
      }
      ++r.cases;
      const double want = static_cast<double>(inter) / static_cast<double>(uni);
      if (iou(rects[i], rects[j]) != want || intersection_area(rects[i], rects[j]) != inter) {
        record_failure(r, "iou " + describe(rects[i]) + " vs " + describe(rects[j]));
      }
    }
  }

  // Actions: containment, stop idempotence, clamping.
  for (const auto& a : rects) {
    for (int sw = 1; sw <= grid; ++sw) {
      for (int sh = 1; sh <= grid; sh += grid - 1) {
        const Size2 step{sw, sh};
        for (Action act : kAllActions) {
          const Rect b = apply_action(a, act, step, dims);
          Rect want = a;
          switch (act) {
            case Action::ExpandXNeg: want.x0 = std::max(0, a.x0 - sw); break;
            case Action::ExpandXPos: want.x1 = std::min(grid, a.x1 + sw); break;
            case Action::ExpandYNeg: want.y0 = std::max(0, a.y0 - sh); break;
            case Action::ExpandYPos: want.y1 = std::min(grid, a.y1 + sh); break;
            case Action::Stop: break;
          }
          ++r.cases;
          if (b != want || !b.contains(a) || !b.valid_in(dims)) {
            record_failure(r, std::string(to_string(act)) + " on " + describe(a) + " gave " + describe(b));
          }
        }
      }
    }
  }

  // Initial glimpses: full size when it fits, inside the image, covering the fixation.
  for (int y = 0; y < grid; ++y) {
    for (int x = 0; x < grid; ++x) {
      for (int w = 1; w <= grid + 2; ++w) {
        for (int h = 1; h <= grid + 2; h += 3) {
          const Rect g = initial_glimpse({x, y}, {w, h}, dims);
          ++r.cases;
          if (!g.valid_in(dims) || g.width() != std::min(w, grid) || g.height() != std::min(h, grid) ||
              !contains(g, FixationPoint{x, y})) {
            record_failure(r, "initial glimpse at (" + std::to_string(x) + "," + std::to_string(y) + ") size " +
                                  std::to_string(w) + "x" + std::to_string(h) + " gave " + describe(g));
          }
        }
      }
    }
  }
  r.seconds = timer.seconds();
  return r;
}

// ------------------------------------------------------------------ similarity

SuiteResult monotonicity_suite(int scenes, std::uint64_t seed) {
  Timer timer;
  SuiteResult r;
  r.name = "analytic_monotonicity";
  const SceneDistribution dist;
  const Size2 init{16, 16}, step{16, 16};
  for (int s = 0; s < scenes; ++s) {
    Rng rng = make_stream({seed, static_cast<std::uint64_t>(s), 0x3070});
    const Scene scene = generate_scene(rng(), dist);
    const ImageDims dims = scene.image.dims();
    Rect rect = initial_glimpse({uniform_int(rng, 0, dims.width - 1), uniform_int(rng, 0, dims.height - 1)}, init, dims);
    double prev = analytic_similarity(scene, rect, SimilarityMode::AttributeCosine);
    for (int t = 0; t < 12; ++t) {
      rect = apply_action(rect, action_from_index(uniform_int(rng, 0, 3)), step, dims);
      const double cur = analytic_similarity(scene, rect, SimilarityMode::AttributeCosine);
      ++r.cases;
      if (cur < prev) {
        record_failure(r, "scene " + std::to_string(s) + " step " + std::to_string(t) + ": " + std::to_string(prev) +
                              " -> " + std::to_string(cur));
      }
      prev = cur;
    }
  }
  r.seconds = timer.seconds();
  return r;
}

}  // namespace fovea::oracle

#include "fovea/eval.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

#include "fovea/error.hpp"
#include "text_util.hpp"

namespace fovea {

namespace {

double percent(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

void check_pairs(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw ShapeError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
}

void check_matrices(const nn::Matrix& p, const nn::Matrix& t) {
  if (p.rows() != t.rows() || p.cols() != t.cols()) throw ShapeError("attribute predictions and targets differ in shape");
}

bool localized(const Rect& r, const Rect& gt) { return iou(r, gt) >= kLocalizationIou; }

}  // namespace

double attribute_accuracy(const nn::Matrix& predictions, const nn::Matrix& targets, double threshold) {
  check_matrices(predictions, targets);
  std::size_t ok = 0;
  for (Eigen::Index i = 0; i < predictions.rows(); ++i) {
    for (Eigen::Index k = 0; k < predictions.cols(); ++k) {
      ok += (predictions(i, k) >= threshold) == (targets(i, k) >= 0.5);
    }
  }
  return percent(ok, static_cast<std::size_t>(predictions.size()));
}

double gt_localization(std::span<const Rect> final_rects, std::span<const Rect> gt_boxes) {
  check_pairs(final_rects.size(), gt_boxes.size(), "gt_localization");
  std::size_t ok = 0;
  for (std::size_t i = 0; i < final_rects.size(); ++i) ok += localized(final_rects[i], gt_boxes[i]);
  return percent(ok, final_rects.size());
}

double attribute_localization(const nn::Matrix& predictions, const nn::Matrix& targets,
                              std::span<const Rect> final_rects, std::span<const Rect> gt_boxes, double threshold) {
  check_matrices(predictions, targets);
  check_pairs(static_cast<std::size_t>(predictions.rows()), final_rects.size(), "attribute_localization");
  check_pairs(final_rects.size(), gt_boxes.size(), "attribute_localization");
  std::size_t ok = 0;
  for (Eigen::Index i = 0; i < predictions.rows(); ++i) {
    if (!localized(final_rects[static_cast<std::size_t>(i)], gt_boxes[static_cast<std::size_t>(i)])) continue;
    for (Eigen::Index k = 0; k < predictions.cols(); ++k) {
      ok += (predictions(i, k) >= threshold) == (targets(i, k) >= 0.5);
    }
  }
  return percent(ok, static_cast<std::size_t>(predictions.size()));
}

double top1_class_accuracy(std::span<const int> class_preds, std::span<const int> class_targets) {
  check_pairs(class_preds.size(), class_targets.size(), "top1_class_accuracy");
  std::size_t ok = 0;
  for (std::size_t i = 0; i < class_preds.size(); ++i) ok += class_preds[i] == class_targets[i];
  return percent(ok, class_preds.size());
}

double top1_localization(std::span<const int> class_preds, std::span<const int> class_targets,
                         std::span<const Rect> final_rects, std::span<const Rect> gt_boxes) {
  check_pairs(class_preds.size(), class_targets.size(), "top1_localization");
  check_pairs(class_preds.size(), final_rects.size(), "top1_localization");
  check_pairs(final_rects.size(), gt_boxes.size(), "top1_localization");
  std::size_t ok = 0;
  for (std::size_t i = 0; i < class_preds.size(); ++i) {
    ok += class_preds[i] == class_targets[i] && localized(final_rects[i], gt_boxes[i]);
  }
  return percent(ok, class_preds.size());
}

IterationStats iteration_statistics(std::span<const Trajectory> trajectories, std::span<const Rect> gt_boxes) {
  check_pairs(trajectories.size(), gt_boxes.size(), "iteration_statistics");
  IterationStats st;
  if (trajectories.empty()) return st;
  const std::size_t states = trajectories.front().rects.size();
  const std::size_t actions = trajectories.front().actions.size();
  const bool with_rewards = !trajectories.front().rewards.empty();
  for (const auto& tr : trajectories) {
    if (tr.rects.size() != states || tr.actions.size() != actions || tr.similarities.size() != states ||
        tr.rewards.size() != (with_rewards ? actions : 0)) {
      throw ShapeError("iteration_statistics: trajectories have different lengths");
    }
  }
  st.mean_similarity.assign(states, 0.0);
  st.mean_iou.assign(states, 0.0);
  if (with_rewards) st.mean_cum_reward.assign(actions, 0.0);
  for (std::size_t j = 0; j < trajectories.size(); ++j) {
    const auto& tr = trajectories[j];
    for (std::size_t t = 0; t < states; ++t) {
      st.mean_similarity[t] += tr.similarities[t];
      st.mean_iou[t] += iou(tr.rects[t], gt_boxes[j]);
    }
    double cum = 0.0;
    for (std::size_t t = 0; t < st.mean_cum_reward.size(); ++t) {
      cum += tr.rewards[t];
      st.mean_cum_reward[t] += cum;
    }
  }
  const double n = static_cast<double>(trajectories.size());
  for (auto* v : {&st.mean_similarity, &st.mean_iou, &st.mean_cum_reward}) {
    for (double& x : *v) x /= n;
  }
  return st;
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  const auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
  j["schema_version"] = kSchemaVersion;
  j["iou_threshold"] = kLocalizationIou;
  j["iou_threshold_inclusive"] = true;
  j["similarity_source"] = similarity_source;
  j["n_samples"] = n_samples;
  j["attribute_accuracy"] = opt(attribute_accuracy);
  j["hit_miss"] = opt(hit_miss);
  j["gt_loc"] = gt_loc;
  j["attribute_localization"] = opt(attribute_localization);
  j["top1_class"] = opt(top1_class);
  j["top1_loc"] = opt(top1_loc);
  j["mean_final_iou"] = mean_final_iou;
  j["per_iteration"] = {{"mean_similarity", per_iteration.mean_similarity},
                        {"mean_iou", per_iteration.mean_iou},
                        {"mean_cum_reward", per_iteration.mean_cum_reward}};
  return j.dump(2) + "\n";
}

std::string MetricsReport::per_iteration_csv() const {
  std::ostringstream os;
  os << "step,mean_similarity,mean_iou,mean_cum_reward\n";
  for (std::size_t t = 0; t < per_iteration.mean_iou.size(); ++t) {
    os << t << ',' << detail::format_double(per_iteration.mean_similarity[t]) << ','
       << detail::format_double(per_iteration.mean_iou[t]) << ',';
    if (t > 0 && t - 1 < per_iteration.mean_cum_reward.size()) {
      os << detail::format_double(per_iteration.mean_cum_reward[t - 1]);
    }
    os << '\n';
  }
  return os.str();
}

EvalResult evaluate(const EvalInputs& in) {
  if (!in.policy) throw ConfigError("evaluate: no policy");
  if (!in.similarity) throw ConfigError("evaluate: no similarity source for reporting");
  if (!in.m1 && in.fixation_override.empty()) throw ConfigError("evaluate: no fixation model");
  if (!in.fixation_override.empty()) check_pairs(in.fixation_override.size(), in.scenes.size(), "evaluate fixations");

  const std::size_t n = in.scenes.size();
  EvalResult res;
  std::vector<FixationPoint> fix;
  if (in.fixation_override.empty()) {
    fix = predict_fixations(*in.m1, in.scenes);
    res.report.hit_miss = hit_rate(fix, in.scenes);
  } else {
    fix.assign(in.fixation_override.begin(), in.fixation_override.end());
  }

  std::vector<RolloutRequest> reqs;
  reqs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) reqs.push_back({&in.scenes[i], i, fix[i], 0});
  RolloutOptions ro;
  ro.mode = RolloutMode::Argmax;
  ro.similarity = in.similarity;
  ro.rewards = &in.rewards;
  res.trajectories = collect_trajectories(*in.policy, reqs, in.glimpse, ro);

  std::vector<Rect> finals, gts;
  finals.reserve(n);
  gts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    finals.push_back(res.trajectories[i].rects.back());
    gts.push_back(in.scenes[i].bbox_gt);
  }
  auto& rep = res.report;
  rep.n_samples = n;
  rep.similarity_source = in.similarity->uses_ventral() ? "learned" : "analytic";
  rep.gt_loc = gt_localization(finals, gts);
  for (std::size_t i = 0; i < n; ++i) rep.mean_final_iou += iou(finals[i], gts[i]) / static_cast<double>(n);
  rep.per_iteration = iteration_statistics(res.trajectories, gts);

  if (in.ventral && n > 0) {
    std::vector<Patch> patches;
    patches.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      patches.push_back(extract_glimpse(in.scenes[i].image, finals[i], in.ventral->input_size()));
    }
    const nn::Matrix pred = predict_batch(*in.ventral, patches);
    if (in.ventral->mode() == SimilarityMode::AttributeCosine) {
      nn::Matrix targets(static_cast<Eigen::Index>(n), pred.cols());
      for (std::size_t i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(in.scenes[i].attributes.size()) != pred.cols()) {
          throw ShapeError("evaluate: attribute count differs from the ventral model");
        }
        for (Eigen::Index k = 0; k < pred.cols(); ++k) targets(static_cast<Eigen::Index>(i), k) = in.scenes[i].attributes[static_cast<std::size_t>(k)];
      }
      rep.attribute_accuracy = attribute_accuracy(pred, targets);
      rep.attribute_localization = attribute_localization(pred, targets, finals, gts);
    } else {
      std::vector<int> preds, targets;
      for (std::size_t i = 0; i < n; ++i) {
        Eigen::Index best = 0;
        pred.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
        preds.push_back(static_cast<int>(best));
        targets.push_back(in.scenes[i].class_id);
      }
      rep.top1_class = top1_class_accuracy(preds, targets);
      rep.top1_loc = top1_localization(preds, targets, finals, gts);
    }
  }
  return res;
}

CrossDistributionReport cross_distribution_eval(const PolicyNet& policy, const M1Model& m1,
                                                std::span<const Scene> train_scenes,
                                                std::span<const Scene> test_scenes, const GlimpseConfig& glimpse,
                                                const RewardConfig& rewards) {
  if (!train_scenes.empty() && !test_scenes.empty() &&
      train_scenes.front().image.dims() != test_scenes.front().image.dims()) {
    throw ShapeError("cross_distribution_eval: image dims differ between distributions");
  }
  const SimilaritySource oracle = SimilaritySource::analytic(rewards.mode);
  EvalInputs in;
  in.m1 = &m1;
  in.policy = &policy;
  in.glimpse = glimpse;
  in.rewards = rewards;
  in.similarity = &oracle;

  CrossDistributionReport out;
  in.scenes = train_scenes;
  out.in_distribution = evaluate(in).report;
  in.scenes = test_scenes;
  out.shifted = evaluate(in).report;
  out.retention = out.in_distribution.gt_loc > 0.0 ? out.shifted.gt_loc / out.in_distribution.gt_loc : 0.0;
  return out;
}

}  // namespace fovea

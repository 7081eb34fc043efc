#include "fovea/pipeline.hpp"

#include <cstdio>
#include <sstream>

#include "fovea/binary_io.hpp"
#include "fovea/error.hpp"

namespace fovea {

namespace {

constexpr const char* kComplete = "complete";

std::string lines(const std::vector<EpochRecord>& log) {
  std::string out;
  for (const auto& r : log) out += r.to_line() + "\n";
  return out;
}

int meta_int(const Checkpoint& c, const std::string& key) {
  const auto it = c.meta.find(key);
  if (it == c.meta.end()) throw SchemaError(key, "missing from " + std::string(to_string(c.role)) + " checkpoint");
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw SchemaError(key, "not an integer: '" + it->second + "'");
  }
}

std::string step_name(int t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%02d.ppm", t);
  return buf;
}

}  // namespace

Pipeline::Pipeline(ExperimentConfig cfg, Notice notice)
    : cfg_(std::move(cfg)), paths_{cfg_.output_dir}, notice_(std::move(notice)) {
  validate(cfg_);
}

void Pipeline::say(const std::string& s) const {
  if (notice_) notice_(s);
}

void Pipeline::generate(bool force) {
  for (auto sp : {Split::Train, Split::Val, Split::Test}) {
    const auto path = paths_.dataset(sp);
    if (std::filesystem::exists(path) && !force) {
      throw ConfigError(path.string() + " already exists (pass --force to overwrite)");
    }
  }
  const std::uint64_t hash = lineage_hash(cfg_, Phase::Data);
  for (auto sp : {Split::Train, Split::Val, Split::Test}) {
    const auto& plan = cfg_.plan(sp);
    Dataset ds{cfg_.scene, hash, generate_scenes(plan.first_seed, plan.count, cfg_.scene)};
    save_dataset(paths_.dataset(sp), ds);
    say("wrote " + paths_.dataset(sp).string() + " (" + std::to_string(plan.count) + " scenes)");
  }
}

Dataset Pipeline::load_split(Split s) const {
  const auto path = paths_.dataset(s);
  if (!std::filesystem::exists(path)) {
    throw MissingPrerequisiteError("split '" + std::string(to_string(s)) + "' requires phase data (run generate)");
  }
  Dataset ds = load_dataset(path, cfg_.scene);
  if (ds.config_hash != lineage_hash(cfg_, Phase::Data)) {
    throw HashMismatchError(path.string() + " was generated from a different configuration (hash " +
                            hex64(ds.config_hash) + ")");
  }
  return ds;
}

Checkpoint Pipeline::load_phase_checkpoint(Phase p) const {
  const auto path = paths_.checkpoint(p);
  if (!std::filesystem::exists(path)) {
    throw MissingPrerequisiteError("requires phase " + std::string(to_string(p)) + " (no " + path.string() + ")");
  }
  Checkpoint c = load_checkpoint(path);
  if (c.config_hash != lineage_hash(cfg_, p)) {
    throw HashMismatchError(path.string() + " was trained under a different configuration (hash " +
                            hex64(c.config_hash) + ", expected " + hex64(lineage_hash(cfg_, p)) + ")");
  }
  if (c.meta[kComplete] != "1") {
    throw MissingPrerequisiteError("requires phase " + std::string(to_string(p)) + " to finish (checkpoint is partial)");
  }
  return c;
}

bool Pipeline::up_to_date(Phase p) const {
  const auto path = paths_.checkpoint(p);
  if (!std::filesystem::exists(path)) return false;
  try {
    const Checkpoint c = load_checkpoint(path);
    const auto it = c.meta.find(kComplete);
    return c.config_hash == lineage_hash(cfg_, p) && it != c.meta.end() && it->second == "1";
  } catch (const FormatError&) {
    return false;
  }
}

void Pipeline::save_model(Phase p, ModelRole role, const nn::Mlp& net, std::map<std::string, std::string> meta) const {
  Checkpoint c{role, net, lineage_hash(cfg_, p), to_ini(cfg_), std::move(meta)};
  save_checkpoint(paths_.checkpoint(p), c);
}

VentralModel Pipeline::load_ventral() const {
  Checkpoint c = load_phase_checkpoint(Phase::Ventral);
  const auto mode = parse_similarity_mode(c.meta["mode"]);
  if (!mode) throw SchemaError("mode", "unknown similarity mode '" + c.meta["mode"] + "'");
  VentralModel m(std::move(c.model), *mode, {meta_int(c, "input_width"), meta_int(c, "input_height")},
                 meta_int(c, "channels"));
  m.freeze();
  return m;
}

M1Model Pipeline::load_m1() const {
  Checkpoint c = load_phase_checkpoint(Phase::M1);
  return M1Model(std::move(c.model), {meta_int(c, "input_width"), meta_int(c, "input_height")},
                 {meta_int(c, "image_width"), meta_int(c, "image_height"), meta_int(c, "channels")});
}

PolicyNet Pipeline::load_policy() const {
  Checkpoint c = load_phase_checkpoint(Phase::Dorsal);
  return PolicyNet(std::move(c.model), {meta_int(c, "input_width"), meta_int(c, "input_height")},
                   meta_int(c, "channels"));
}

Pipeline::Outcome Pipeline::train(Phase phase, bool force) {
  if (phase == Phase::Data) throw ConfigError("use generate for the data phase");
  if (!force && up_to_date(phase)) {
    say("phase " + std::string(to_string(phase)) + " is up to date (config " + hex64(lineage_hash(cfg_, phase)) +
        "); nothing to do");
    return Outcome::UpToDate;
  }
  // Prerequisites are checked before any data is loaded so the error names the phase.
  if (phase >= Phase::M1) load_phase_checkpoint(Phase::Ventral);
  if (phase >= Phase::Dorsal) load_phase_checkpoint(Phase::M1);

  const Dataset train = load_split(Split::Train);
  const int channels = cfg_.scene.dims.channels;
  const TrainConfig tc = cfg_.phase_config(phase);
  std::vector<EpochRecord> log;
  const auto log_epoch = [&](const EpochRecord& r) { say(r.to_line()); };

  if (phase == Phase::Ventral) {
    auto res = train_ventral(train.scenes, cfg_.mode, cfg_.glimpse.fixed_size, tc);
    for (const auto& r : res.log) log_epoch(r);
    log = res.log;
    save_model(phase, ModelRole::Ventral, res.model.net(),
               {{"mode", std::string(to_string(cfg_.mode))},
                {"input_width", std::to_string(cfg_.glimpse.fixed_size.width)},
                {"input_height", std::to_string(cfg_.glimpse.fixed_size.height)},
                {"channels", std::to_string(channels)},
                {kComplete, "1"}});
  } else if (phase == Phase::M1) {
    const VentralModel ventral = load_ventral();
    FixationTargets targets{lineage_hash(cfg_, Phase::Ventral), extract_fixation_targets(ventral, train.scenes)};
    save_fixation_targets(paths_.fixation_targets(), targets);
    say("fixation target hit rate on train: " + std::to_string(hit_rate(targets.points, train.scenes)) + "%");
    auto res = train_m1(train.scenes, targets.points, cfg_.m1_input, tc);
    for (const auto& r : res.log) log_epoch(r);
    log = res.log;
    save_model(phase, ModelRole::Fixation, res.model.net(),
               {{"input_width", std::to_string(cfg_.m1_input.width)},
                {"input_height", std::to_string(cfg_.m1_input.height)},
                {"image_width", std::to_string(cfg_.scene.dims.width)},
                {"image_height", std::to_string(cfg_.scene.dims.height)},
                {"channels", std::to_string(channels)},
                {kComplete, "1"}});
  } else {
    const VentralModel ventral = load_ventral();
    const std::uint64_t ventral_fp = ventral.net().fingerprint();
    const M1Model m1 = load_m1();
    const auto fixations = predict_fixations(m1, train.scenes);
    const SimilaritySource sim = cfg_.dorsal_similarity == SimilaritySourceKind::Analytic
                                     ? SimilaritySource::analytic(cfg_.mode)
                                     : SimilaritySource::learned(ventral);
    PolicyNet policy(cfg_.glimpse.fixed_size, channels, tc.hidden, tc.seed);
    DorsalTrainInputs in{train.scenes, fixations, &sim, cfg_.glimpse, cfg_.rewards};
    const std::map<std::string, std::string> geometry = {
        {"input_width", std::to_string(cfg_.glimpse.fixed_size.width)},
        {"input_height", std::to_string(cfg_.glimpse.fixed_size.height)},
        {"channels", std::to_string(channels)}};
    auto res = train_dorsal(policy, in, tc, [&](const PolicyNet& p, const EpochRecord& r) {
      log_epoch(r);
      auto meta = geometry;
      meta["epoch"] = std::to_string(r.epoch);
      meta[kComplete] = "0";
      save_model(Phase::Dorsal, ModelRole::Policy, p.net(), meta);
    });
    if (ventral.net().fingerprint() != ventral_fp) throw Error("ventral model changed during dorsal training");
    log = res.log;
    auto meta = geometry;
    meta[kComplete] = "1";
    save_model(phase, ModelRole::Policy, policy.net(), meta);
  }
  write_text_atomic(paths_.training_log(phase), lines(log));
  return Outcome::Trained;
}

EvalResult Pipeline::evaluate(Split split) {
  const PolicyNet policy = load_policy();
  const M1Model m1 = load_m1();
  const VentralModel ventral = load_ventral();
  const Dataset ds = load_split(split);
  const SimilaritySource sim = cfg_.dorsal_similarity == SimilaritySourceKind::Analytic
                                   ? SimilaritySource::analytic(cfg_.mode)
                                   : SimilaritySource::learned(ventral);
  EvalInputs in;
  in.scenes = ds.scenes;
  in.m1 = &m1;
  in.policy = &policy;
  in.glimpse = cfg_.glimpse;
  in.rewards = cfg_.rewards;
  in.similarity = &sim;
  in.ventral = &ventral;
  EvalResult res = fovea::evaluate(in);

  write_text_atomic(paths_.metrics(split), res.report.to_json());
  write_text_atomic(paths_.per_iteration(split), res.report.per_iteration_csv());
  std::string records;
  for (const auto& t : res.trajectories) records += trajectory_record(t) + "\n";
  write_text_atomic(paths_.trajectories(split), records);
  return res;
}

Pipeline::RolloutOutput Pipeline::rollout(Split split, std::size_t index) {
  const PolicyNet policy = load_policy();
  const M1Model m1 = load_m1();
  const Dataset ds = load_split(split);
  if (index >= ds.scenes.size()) {
    throw ConfigError("scene index " + std::to_string(index) + " is out of range for split '" +
                      std::string(to_string(split)) + "' (" + std::to_string(ds.scenes.size()) + " scenes)");
  }
  const Scene& scene = ds.scenes[index];
  const SimilaritySource sim = SimilaritySource::analytic(cfg_.mode);
  RolloutOptions ro;
  ro.mode = RolloutMode::Argmax;
  ro.similarity = &sim;
  ro.rewards = &cfg_.rewards;
  const FixationPoint fix = predict_fixation(m1, scene.image);

  RolloutOutput out;
  out.trajectory = collect_trajectory(scene, index, policy, cfg_.glimpse, fix, ro);
  out.record = trajectory_record(out.trajectory);

  const auto dir = paths_.rollout_dir(split, index);
  std::filesystem::create_directories(dir);
  const std::array<OverlayStyle, 2> styles = {OverlayStyle{{0.0f, 1.0f, 0.0f}}, OverlayStyle{{0.2f, 0.4f, 1.0f}}};
  for (std::size_t t = 0; t < out.trajectory.rects.size(); ++t) {
    const std::array<Rect, 2> rects = {scene.bbox_gt, out.trajectory.rects[t]};
    Image img = render_overlay(scene.image, rects, styles);
    if (t == 0) draw_marker(img, fix, {1.0f, 1.0f, 1.0f});
    const auto path = dir / step_name(static_cast<int>(t));
    write_ppm(path, img);
    out.overlays.push_back(path);
  }
  write_text_atomic(dir / "trajectory.jsonl", out.record + "\n");
  return out;
}

}  // namespace fovea

// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
//
//   fovea_acceptance [output_dir]
//
// Criteria 1-5 run the oracle suites. Criteria 6-10 train the full pipeline on
// the default configuration (2000 training scenes, analytic attribute cosine)
// and evaluate on the 500 held-out test scenes.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "fovea/oracles.hpp"
#include "fovea/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using namespace fovea;
using clk = std::chrono::steady_clock;

double since(clk::time_point t) { return std::chrono::duration<double>(clk::now() - t).count(); }

int failed = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("%s  criterion %-2d %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failed;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void rewards_and_folds() {
  const auto t0 = clk::now();
  const auto a = oracle::reward_equivalence_suite(0.0);
  const auto b = oracle::reward_equivalence_suite(0.1);
  const double secs = since(t0);
  report(1, a.passed() && b.passed() && secs < 30.0,
         fmt("reward oracle: %zu cases, %zu mismatches, %.1fs (limit 30s)%s", a.cases + b.cases,
             a.failures + b.failures, secs, a.first_failure.empty() ? b.first_failure.c_str() : a.first_failure.c_str()));

  const bool examples = update_max_similarity(0.5, 0.54, 0.1) == 0.5 && update_max_similarity(0.5, 0.56, 0.1) == 0.56 &&
                        update_max_similarity(0.5, 0.5, 0.0) == 0.5;
  const auto folds = oracle::cumulative_max_suite(1000, 7);
  report(2, examples && folds.passed(),
         fmt("max-similarity examples %s, %zu random folds, %zu mismatches", examples ? "ok" : "wrong", folds.cases,
             folds.failures));
}

void gradients() {
  const auto t0 = clk::now();
  std::size_t cases = 0, failures = 0;
  std::string first;
  for (auto loss : {oracle::GradLoss::Mse, oracle::GradLoss::Bce, oracle::GradLoss::SoftmaxCe,
                    oracle::GradLoss::Reinforce}) {
    const auto r = oracle::gradient_suite(loss, 20, 11);
    cases += r.cases;
    failures += r.failures;
    if (first.empty()) first = r.first_failure;
  }
  const double secs = since(t0);
  report(3, failures == 0 && cases > 0 && secs < 120.0,
         fmt("gradient check: 4 losses x 20 models, %zu checks, %zu over 1e-5, %.1fs (limit 120s) %s", cases, failures,
             secs, first.c_str()));
}

void geometry_and_monotonicity() {
  auto t0 = clk::now();
  const auto g = oracle::geometry_suite(8);
  double secs = since(t0);
  report(4, g.passed() && secs < 60.0,
         fmt("geometry 8x8: %zu cases, %zu failures, %.1fs (limit 60s) %s", g.cases, g.failures, secs,
             g.first_failure.c_str()));
  t0 = clk::now();
  const auto m = oracle::monotonicity_suite(1000, 13);
  report(5, m.passed(),
         fmt("expand-only similarity: 1000 scenes, %zu steps checked, %zu decreases %s", m.cases, m.failures, m.first_failure.c_str()));
}

void pipeline(const fs::path& out_dir) {
  ExperimentConfig cfg;
  cfg.output_dir = out_dir;
  fs::remove_all(out_dir);
  Pipeline p(cfg);

  const auto start = clk::now();
  p.generate(true);
  p.train(Phase::Ventral, true);
  const auto m1_start = clk::now();
  p.train(Phase::M1, true);
  const double m1_secs = since(m1_start);
  p.train(Phase::Dorsal, true);
  const EvalResult trained = p.evaluate(Split::Test);
  const double total_secs = since(start);

  const Dataset test = p.load_split(Split::Test);
  const M1Model m1 = p.load_m1();
  const PolicyNet policy = p.load_policy();
  const auto sim = SimilaritySource::analytic(cfg.mode);

  EvalInputs in;
  in.scenes = test.scenes;
  in.m1 = &m1;
  in.glimpse = cfg.glimpse;
  in.rewards = cfg.rewards;
  in.similarity = &sim;

  const auto dcfg = cfg.phase_config(Phase::Dorsal);
  const PolicyNet untrained(cfg.glimpse.fixed_size, cfg.scene.dims.channels, dcfg.hidden, dcfg.seed);
  in.policy = &untrained;
  const double random_loc = evaluate(in).report.gt_loc;
  in.policy = &policy;

  const double loc = trained.report.gt_loc;
  report(6, loc > 60.0 && loc >= 2.0 * random_loc && total_secs < 1200.0,
         fmt("GT-Loc %.1f%% (need > 60), untrained policy %.1f%% (need >= 2x), pipeline %.0fs (limit 1200s)", loc,
             random_loc, total_secs));

  const double hit = trained.report.hit_miss.value_or(0.0);
  report(7, hit >= 85.0 && m1_secs < 300.0,
         fmt("fixation hit rate %.1f%% (need >= 85), M1 phase %.0fs (limit 300s)", hit, m1_secs));

  const auto& it = trained.report.per_iteration;
  int rising = 0;
  for (std::size_t s = 0; s + 1 < it.mean_similarity.size(); ++s) rising += it.mean_similarity[s + 1] >= it.mean_similarity[s];
  const int pairs = static_cast<int>(it.mean_similarity.size()) - 1;
  const bool iou_up = it.mean_iou.back() > it.mean_iou.front();
  report(8, iou_up && rising >= 0.9 * pairs,
         fmt("mean IoU %.3f -> %.3f, similarity non-decreasing on %d of %d steps", it.mean_iou.front(),
             it.mean_iou.back(), rising, pairs));

  // Distribution B: noise backgrounds, cool palette, same seeds as the test split.
  SceneDistribution b = cfg.scene;
  b.backgrounds = {BackgroundFamily::Noise};
  b.palette = Palette::Cool;
  const auto shifted_scenes = generate_scenes(cfg.test.first_seed, cfg.test.count, b);
  const auto cross = cross_distribution_eval(policy, m1, test.scenes, shifted_scenes, cfg.glimpse, cfg.rewards);
  // Action selection must not depend on the ventral model: attaching one changes no rect.
  const VentralModel ventral = p.load_ventral();
  EvalInputs with_ventral = in;
  with_ventral.ventral = &ventral;
  const auto plain = evaluate(in);
  const auto attached = evaluate(with_ventral);
  bool same_rects = plain.trajectories.size() == attached.trajectories.size();
  for (std::size_t i = 0; same_rects && i < plain.trajectories.size(); ++i) {
    same_rects = plain.trajectories[i].rects == attached.trajectories[i].rects;
  }
  report(9, cross.retention >= 0.70 && same_rects && !sim.uses_ventral(),
         fmt("shifted GT-Loc %.1f%% vs %.1f%%, retention %.3f (need >= 0.70); actions independent of ventral: %s",
             cross.shifted.gt_loc, cross.in_distribution.gt_loc, cross.retention, same_rects ? "yes" : "no"));

  // Determinism of the written artifacts.
  const auto& paths = p.paths();
  const std::string metrics = slurp(paths.metrics(Split::Test));
  const std::string traj = slurp(paths.trajectories(Split::Test));
  const std::string csv = slurp(paths.per_iteration(Split::Test));
  p.evaluate(Split::Test);
  bool identical = metrics == slurp(paths.metrics(Split::Test)) && traj == slurp(paths.trajectories(Split::Test)) &&
                   csv == slurp(paths.per_iteration(Split::Test));
  const auto r1 = p.rollout(Split::Test, 3);
  std::vector<std::string> frames;
  for (const auto& f : r1.overlays) frames.push_back(slurp(f));
  const auto r2 = p.rollout(Split::Test, 3);
  identical = identical && r1.record == r2.record && r1.overlays.size() == r2.overlays.size();
  for (std::size_t i = 0; identical && i < frames.size(); ++i) identical = frames[i] == slurp(r2.overlays[i]);
  report(10, identical, fmt("repeated evaluate and rollout outputs byte-identical: %s", identical ? "yes" : "no"));
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "fovea_acceptance";
  try {
    rewards_and_folds();
    gradients();
    geometry_and_monotonicity();
    pipeline(out);
  } catch (const std::exception& e) {
    std::printf("FAIL  aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%s: %d criteria failed\n", failed == 0 ? "ACCEPTED" : "REJECTED", failed);
  return failed == 0 ? 0 : 1;
}

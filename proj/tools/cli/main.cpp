// fovea: generate data, train the three learned phases, evaluate, render
// rollouts, and run the oracle suites from one config file.
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fovea/config.hpp"
#include "fovea/error.hpp"
#include "fovea/oracles.hpp"
#include "fovea/pipeline.hpp"

namespace {

using namespace fovea;

enum Exit : int { kOk = 0, kFailure = 1, kUsage = 2 };

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "experiment config (INI); defaults to $FOVEA_CONFIG");
  cmd->add_option("--seed", c.seed, "experiment seed");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_flag("--force", c.force, "overwrite or retrain existing artifacts");
  cmd->add_option("--set", c.overrides, "override a config key, section.key=value")->take_all();
}

ExperimentConfig resolve_config(const Common& c) {
  ExperimentConfig cfg;
  std::string path = c.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv(kConfigEnvVar)) path = env;
  }
  if (!path.empty()) cfg = load_config(path);
  cfg = with_overrides(cfg, c.overrides);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  validate(cfg);
  return cfg;
}

Pipeline make_pipeline(const Common& c) {
  return Pipeline(resolve_config(c), [](const std::string& line) { std::cerr << line << '\n'; });
}

int run_verify() {
  using oracle::SuiteResult;
  std::vector<SuiteResult> suites;
  suites.push_back(oracle::reward_equivalence_suite(0.0));
  suites.back().name += " th=0";
  suites.push_back(oracle::reward_equivalence_suite(0.1));
  suites.back().name += " th=0.1";
  suites.push_back(oracle::cumulative_max_suite(1000, 7));
  for (auto loss : {oracle::GradLoss::Mse, oracle::GradLoss::Bce, oracle::GradLoss::SoftmaxCe,
                    oracle::GradLoss::Reinforce}) {
    suites.push_back(oracle::gradient_suite(loss, 20, 11));
  }
  suites.push_back(oracle::geometry_suite(8));
  suites.push_back(oracle::monotonicity_suite(1000, 13));

  nlohmann::ordered_json summary;
  summary["passed"] = true;
  auto& list = summary["suites"] = nlohmann::ordered_json::array();
  for (const auto& s : suites) {
    list.push_back({{"name", s.name},
                    {"passed", s.passed()},
                    {"cases", s.cases},
                    {"failures", s.failures},
                    {"seconds", s.seconds},
                    {"first_failure", s.first_failure}});
    if (!s.passed()) summary["passed"] = false;
    std::cerr << (s.passed() ? "PASS " : "FAIL ") << s.name << " (" << s.cases << " cases, " << s.failures
              << " failures)\n";
  }
  std::cout << summary.dump() << '\n';
  return summary["passed"].get<bool>() ? kOk : kFailure;
}

std::string metrics_line(const MetricsReport& r) {
  std::string s = "gt_loc=" + std::to_string(r.gt_loc) + " mean_final_iou=" + std::to_string(r.mean_final_iou);
  if (r.hit_miss) s += " hit_miss=" + std::to_string(*r.hit_miss);
  if (r.attribute_accuracy) s += " attribute_accuracy=" + std::to_string(*r.attribute_accuracy);
  if (r.top1_loc) s += " top1_loc=" + std::to_string(*r.top1_loc);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Foveated glimpse localization: data, training, evaluation, and verification"};
  app.require_subcommand(1);

  Common common;

  auto* gen = app.add_subcommand("generate", "write the train/val/test scene datasets");
  add_common(gen, common);

  auto* train = app.add_subcommand("train", "train one phase (ventral, m1, dorsal)");
  add_common(train, common);
  std::string phase_name;
  train->add_option("--phase", phase_name, "ventral | m1 | dorsal")->required();

  auto* eval = app.add_subcommand("evaluate", "argmax evaluation on one split");
  add_common(eval, common);
  std::string split_name = "test";
  eval->add_option("--split", split_name, "train | val | test");

  auto* roll = app.add_subcommand("rollout", "render an argmax rollout of one scene");
  add_common(roll, common);
  std::size_t scene_index = 0;
  roll->add_option("--scene", scene_index, "scene index within the split")->required();
  roll->add_option("--split", split_name, "train | val | test");

  auto* verify = app.add_subcommand("verify", "run the oracle suites");
  add_common(verify, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (verify->parsed()) return run_verify();

    if (gen->parsed()) {
      auto p = make_pipeline(common);
      p.generate(common.force);
      return kOk;
    }
    if (train->parsed()) {
      const auto phase = parse_phase(phase_name);
      if (!phase || *phase == Phase::Data) throw ConfigError("--phase: expected ventral, m1, or dorsal, got '" + phase_name + "'");
      auto p = make_pipeline(common);
      p.train(*phase, common.force);  // an up-to-date phase reports itself through the notice
      return kOk;
    }
    const auto split = parse_split(split_name);
    if (!split) throw ConfigError("--split: expected train, val, or test, got '" + split_name + "'");
    if (eval->parsed()) {
      auto p = make_pipeline(common);
      const auto result = p.evaluate(*split);
      std::cout << metrics_line(result.report) << '\n';
      return kOk;
    }
    if (roll->parsed()) {
      auto p = make_pipeline(common);
      const auto out = p.rollout(*split, scene_index);
      std::cout << out.record << '\n';
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

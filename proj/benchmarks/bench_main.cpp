#include <benchmark/benchmark.h>

#include "fovea/policy.hpp"
#include "fovea/rng.hpp"

namespace {

using namespace fovea;

void BM_ExtractGlimpse(benchmark::State& state) {
  const Scene s = generate_scene(1, SceneDistribution{});
  const int side = static_cast<int>(state.range(0));
  const Rect r{10, 10, 10 + side, 10 + side};
  for (auto _ : state) benchmark::DoNotOptimize(extract_glimpse(s.image, r, {32, 32}));
}
BENCHMARK(BM_ExtractGlimpse)->Arg(16)->Arg(64)->Arg(118);

void BM_MlpForwardBackward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const nn::Mlp net(make_spec(32 * 32 * 3, {128, 64}, {{"action", 5, nn::OutputMap::Softmax}}), 1);
  const nn::Matrix x = nn::Matrix::Random(batch, net.input_width());
  const nn::Matrix g = nn::Matrix::Random(batch, 5);
  for (auto _ : state) {
    const auto cache = net.forward(x);
    benchmark::DoNotOptimize(net.backward(cache, g));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpForwardBackward)->Arg(1)->Arg(32)->Arg(384);

void BM_AssignRewards(benchmark::State& state) {
  Rng rng = make_stream({2});
  std::vector<double> trace(13);
  std::vector<Action> actions(12);
  for (double& v : trace) v = uniform01(rng);
  for (Action& a : actions) a = action_from_index(uniform_int(rng, 0, 4));
  const RewardConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(assign_rewards(trace, actions, cfg));
}
BENCHMARK(BM_AssignRewards);

void BM_Rollout(benchmark::State& state) {
  const Scene s = generate_scene(3, SceneDistribution{});
  const PolicyNet p({32, 32}, 3, {128, 64}, 4);
  const auto sim = SimilaritySource::analytic(SimilarityMode::AttributeCosine);
  const RewardConfig rc;
  const RolloutOptions o{RolloutMode::Sample, &sim, &rc, false};
  const FixationPoint f{(s.bbox_gt.x0 + s.bbox_gt.x1) / 2, (s.bbox_gt.y0 + s.bbox_gt.y1) / 2};
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(collect_trajectory(s, 0, p, GlimpseConfig{}, f, o, seed++));
}
BENCHMARK(BM_Rollout);

}  // namespace
BENCHMARK_MAIN();

#include <vector>

#include <benchmark/benchmark.h>

#include "saferl/config.hpp"
#include "saferl/nets.hpp"
#include "saferl/policies.hpp"
#include "saferl/runner.hpp"
#include "saferl/safety.hpp"
#include "saferl/trainers.hpp"

namespace {

using namespace saferl;

MlpSpec quad_policy_spec() {
  return MlpSpec::make(6, {256, 256},
                       {OutputHead{"alpha", 2, HeadTransform::kSoftplusPlusOne},
                        OutputHead{"beta", 2, HeadTransform::kSoftplusPlusOne}});
}

void BM_MlpForward(benchmark::State& state) {
  const Mlp net(quad_policy_spec());
  Rng rng(1);
  const auto params = glorot_init(net.spec(), rng);
  const std::vector<double> x = {0.1, -0.2, 0.3, 0.0, 0.5, -0.5};
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(params.values, x));
}
BENCHMARK(BM_MlpForward);

void BM_MlpBatchForwardBackward(benchmark::State& state) {
  const Mlp net(quad_policy_spec());
  Rng rng(2);
  const auto params = glorot_init(net.spec(), rng);
  const auto rows = static_cast<std::size_t>(state.range(0));
  std::vector<double> x(rows * 6), up(rows * 4, 0.01), grad(net.param_count());
  for (double& v : x) v = rng.uniform(-1, 1);
  BatchTrace trace;
  for (auto _ : state) {
    net.forward_batch(params.values, x, rows, trace);
    net.backward_batch(params.values, trace, up, grad);
    benchmark::DoNotOptimize(grad.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MlpBatchForwardBackward)->Arg(1)->Arg(64)->Arg(256);

void BM_BetaSample(benchmark::State& state) {
  Rng init(3);
  const Policy p = Policy::beta_box(6, 2, {256, 256}, init);
  const std::vector<double> x = {0.1, -0.2, 0.3, 0.0, 0.5, -0.5};
  const ActionBox box = ActionBox::make({-1.0, -2.0}, {3.0, 0.5});
  Rng rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(beta_policy_sample(p, x, box, rng));
}
BENCHMARK(BM_BetaSample);

void BM_MaxInnerRectangle(benchmark::State& state) {
  const ActionBox actuator = ActionBox::cube(2, -5, 5);
  Rng rng(5);
  std::vector<std::vector<double>> rows;
  std::vector<double> bs;
  for (int i = 0; i < 256; ++i) {
    rows.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
    bs.push_back(rng.uniform(1, 6));  // always feasible on the +-5 box
  }
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(max_inner_hyperrectangle(rows[i % 256], bs[i % 256], actuator));
    ++i;
  }
}
BENCHMARK(BM_MaxInnerRectangle);

void BM_PpoQuadIteration(benchmark::State& state) {
  const auto cfg = default_config(EnvKind::kQuadcopter, Algorithm::kPpoBeta);
  const auto env = make_environment(cfg);
  PpoTrainer trainer(*env, make_initial_policy(cfg, *env, 1),
                     ControlMode::kBetaSafe, cfg.ppo);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.iterate());
}
BENCHMARK(BM_PpoQuadIteration)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();

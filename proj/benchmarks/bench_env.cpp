#include <benchmark/benchmark.h>

#include "plshield/envs/gridworld.hpp"
#include "plshield/rng.hpp"

using namespace plshield;

namespace {

envs::GridConfig pacman_config(bool noisy) {
  envs::GridConfig cfg;
  cfg.domain = envs::Domain::Pacman;
  cfg.width = 5;
  cfg.height = 5;
  cfg.stars = {{4, 4}, {0, 4}};
  cfg.fires = {{2, 2}};
  cfg.max_steps = 200;
  if (noisy) {
    cfg.sensors.noisy = true;
    cfg.sensors.tp_rate = 0.95;
    cfg.sensors.tn_rate = 0.95;
  }
  return cfg;
}

}  // namespace

static void EnvStep(benchmark::State& state) {
  const envs::GridConfig cfg = pacman_config(false);
  Rng env_rng(1), act_rng(2);
  envs::GridState s = envs::reset(cfg, 1);
  for (auto _ : state) {
    if (s.done) s = envs::reset(cfg, 1);
    const int a = static_cast<int>(act_rng.uniform_int(envs::kNumActions));
    benchmark::DoNotOptimize(envs::step(s, a, cfg, env_rng).reward);
  }
}
BENCHMARK(EnvStep);

static void SenseNoisy(benchmark::State& state) {
  const envs::GridConfig cfg = pacman_config(true);
  Rng sensor_rng(3);
  const envs::GridState s = envs::reset(cfg, 1);
  const int horizon = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto r = envs::sense(s, cfg, horizon, sensor_rng);
    benchmark::DoNotOptimize(r.values.data());
  }
}
BENCHMARK(SenseNoisy)->Arg(1)->Arg(2);

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "plshield/envs/lookahead.hpp"
#include "plshield/rng.hpp"
#include "plshield/shield/shield.hpp"

using namespace plshield;

namespace {

const shield::CompiledShield& lookahead_shield(int horizon) {
  static shield::CompiledShield shields[] = {
      [] {
        auto g = envs::lookahead_program(envs::Domain::Pacman, 1);
        return shield::CompiledShield::build(g.theory, g.actions, g.sensors);
      }(),
      [] {
        auto g = envs::lookahead_program(envs::Domain::Pacman, 2);
        return shield::CompiledShield::build(g.theory, g.actions, g.sensors);
      }(),
      [] {
        auto g = envs::lookahead_program(envs::Domain::Pacman, 3);
        return shield::CompiledShield::build(g.theory, g.actions, g.sensors);
      }(),
  };
  return shields[horizon - 1];
}

shield::SensorReading reading_for(const shield::CompiledShield& s, Rng& rng) {
  shield::SensorReading r;
  for (size_t i = 0; i < s.num_sensors(); ++i) r.values.push_back(rng.uniform());
  return r;
}

}  // namespace

static void ShieldDecide(benchmark::State& state) {
  const auto& s = lookahead_shield(static_cast<int>(state.range(0)));
  Rng rng(3);
  const shield::PolicyDistribution pi{{0.1, 0.3, 0.2, 0.25, 0.15}};
  const auto h = reading_for(s, rng);
  for (auto _ : state) {
    auto d = s.decide(pi, h);
    benchmark::DoNotOptimize(d.policy_safety);
  }
}
BENCHMARK(ShieldDecide)->Arg(1)->Arg(2)->Arg(3);

static void ShieldDecideWithGradients(benchmark::State& state) {
  const auto& s = lookahead_shield(static_cast<int>(state.range(0)));
  Rng rng(4);
  const shield::PolicyDistribution pi{{0.1, 0.3, 0.2, 0.25, 0.15}};
  const auto h = reading_for(s, rng);
  for (auto _ : state) {
    auto [d, g] = s.decide_with_gradients(pi, h);
    benchmark::DoNotOptimize(g.d_policy_safety.data());
  }
}
BENCHMARK(ShieldDecideWithGradients)->Arg(1)->Arg(2)->Arg(3);

static void ShieldRejection(benchmark::State& state) {
  const auto& s = lookahead_shield(static_cast<int>(state.range(0)));
  Rng rng(5);
  const shield::PolicyDistribution pi{{0.1, 0.3, 0.2, 0.25, 0.15}};
  const auto h = reading_for(s, rng);
  for (auto _ : state) {
    auto r = s.rejection_decide(pi, h);
    benchmark::DoNotOptimize(r.renormalized.data());
  }
}
BENCHMARK(ShieldRejection)->Arg(1)->Arg(2)->Arg(3);

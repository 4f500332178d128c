#include <benchmark/benchmark.h>

#include "plshield/circuit/circuit.hpp"
#include "plshield/envs/lookahead.hpp"
#include "plshield/logic/parser.hpp"
#include "plshield/rng.hpp"

using namespace plshield;

namespace {

logic::GroundProgram lookahead_ground(int horizon) {
  auto gen = envs::lookahead_program(envs::Domain::Pacman, horizon);
  logic::Theory t = gen.theory;
  logic::AnnotatedDisjunction pi;
  for (const auto& a : gen.actions) pi.heads.push_back({0.2, a});
  t.ads.push_back(pi);
  return logic::ground(t, logic::parse_atom("safe"));
}

wmc::Valuation random_valuation(const logic::GroundProgram& gp, Rng& rng) {
  wmc::Valuation v = wmc::Valuation::defaults(gp);
  for (auto& p : v.fact_probs) p = rng.uniform();
  return v;
}

}  // namespace

static void CompileLookahead(benchmark::State& state) {
  const logic::GroundProgram gp = lookahead_ground(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    wmc::Circuit c = wmc::compile(gp);
    benchmark::DoNotOptimize(c.size());
  }
}
BENCHMARK(CompileLookahead)->Arg(1)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

static void EvaluateLookahead(benchmark::State& state) {
  const logic::GroundProgram gp = lookahead_ground(static_cast<int>(state.range(0)));
  const wmc::Circuit c = wmc::compile(gp);
  Rng rng(1);
  const wmc::Valuation v = random_valuation(gp, rng);
  for (auto _ : state) benchmark::DoNotOptimize(c.evaluate(v));
  state.SetLabel(std::to_string(c.size()) + " nodes");
}
BENCHMARK(EvaluateLookahead)->Arg(1)->Arg(2)->Arg(3)->Arg(4);

static void GradientLookahead(benchmark::State& state) {
  const logic::GroundProgram gp = lookahead_ground(static_cast<int>(state.range(0)));
  const wmc::Circuit c = wmc::compile(gp);
  Rng rng(1);
  const wmc::Valuation v = random_valuation(gp, rng);
  for (auto _ : state) {
    wmc::GradientVector g = c.gradient(v);
    benchmark::DoNotOptimize(g.fact_grads.data());
  }
}
BENCHMARK(GradientLookahead)->Arg(1)->Arg(2)->Arg(3)->Arg(4);

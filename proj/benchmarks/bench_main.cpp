#include <benchmark/benchmark.h>

#include "sgnep/ridehail.hpp"
#include "sgnep/tikhonov.hpp"

using namespace sgnep;

namespace {

GameSpec table_two_game() {
  ridehail::TableTwoOptions o;
  o.seed = 7;
  return ridehail::build_game(ridehail::table_two_market(o));
}

ScheduleOptions table_two_schedule() {
  ScheduleOptions s;
  s.nu = {1e3};
  s.tau = {1e3};
  return s;
}

MultiplierGraph ring(std::size_t n, double w) {
  Matrix W = MultiplierGraph::ring(n).weights();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) W(i, j) *= w;
  }
  return MultiplierGraph(W);
}

}  // namespace

void BM_OracleGradient(benchmark::State& state) {
  const GameSpec g = table_two_game();
  const BlockVector x = box_midpoints(g);
  RandomStream rng(1, 0);
  const Vector xi = g.oracle->draw_sample(0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(g.oracle->gradient(0, x, xi));
}
BENCHMARK(BM_OracleGradient);

// One synchronous round: a sample and an agent_update per firm.
void BM_AgentRound(benchmark::State& state) {
  const GameSpec g = table_two_game();
  TikhonovSolver solver(g, ring(g.num_agents, 10.0), table_two_schedule(), SolverOptions{}, 7);
  for (auto _ : state) solver.apply_round(solver.sample_gradients());
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_AgentRound);

void BM_CompactStep(benchmark::State& state) {
  const GameSpec g = table_two_game();
  const MultiplierGraph graph = ring(g.num_agents, 10.0);
  TikhonovSolver solver(g, graph, table_two_schedule(), SolverOptions{}, 7);
  const BlockVector grads = solver.sample_gradients();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        compact_step(g, graph, solver.states(), grads, solver.schedule(), 100));
  }
}
BENCHMARK(BM_CompactStep);
BENCHMARK_MAIN();

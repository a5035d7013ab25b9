#include <benchmark/benchmark.h>

#include "fpr/dynamics.hpp"
#include "fpr/equilibrium.hpp"
#include "fpr/market.hpp"
#include "fpr/potential.hpp"

namespace {

fpr::MarketInstance square_market(std::size_t n) {
  return fpr::generate_random_market(n, n, 7);
}

void BM_PrdStepAllBuyers(benchmark::State& state) {
  const auto market = square_market(static_cast<std::size_t>(state.range(0)));
  fpr::BidProfile b = fpr::default_initial_bids(market);
  std::vector<std::size_t> everyone(market.n);
  for (std::size_t i = 0; i < market.n; ++i) everyone[i] = i;
  for (auto _ : state) {
    b = fpr::prd_step(b, everyone, market);
    benchmark::DoNotOptimize(b.bids.flat().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_PrdStepAllBuyers)->Arg(10)->Arg(30)->Arg(100);

void BM_BestResponse(benchmark::State& state) {
  const auto market = square_market(static_cast<std::size_t>(state.range(0)));
  const fpr::BidProfile b = fpr::default_initial_bids(market);
  for (auto _ : state) {
    auto row = fpr::best_response(0, b, market);
    benchmark::DoNotOptimize(row.data());
  }
}
BENCHMARK(BM_BestResponse)->Arg(10)->Arg(30)->Arg(100);

void BM_Potential(benchmark::State& state) {
  const auto market = square_market(static_cast<std::size_t>(state.range(0)));
  const fpr::BidProfile b = fpr::default_initial_bids(market);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fpr::potential(b, market));
  }
}
BENCHMARK(BM_Potential)->Arg(10)->Arg(30)->Arg(100);

void BM_RoundRobinPrdRun(benchmark::State& state) {
  const auto market = square_market(10);
  const fpr::BidProfile b0 = fpr::default_initial_bids(market);
  const auto schedule = fpr::make_round_robin_schedule(market.n, 1000);
  fpr::DynamicsConfig config;
  config.max_steps = 1000;
  config.record_every = 1000;
  for (auto _ : state) {
    auto trajectory = fpr::run_dynamics(market, b0, schedule, config);
    benchmark::DoNotOptimize(trajectory.steps_taken);
  }
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_RoundRobinPrdRun);

void BM_EquilibriumOracle(benchmark::State& state) {
  const auto market = square_market(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto cert = fpr::compute_equilibrium(market, 1e-6, 11);
    benchmark::DoNotOptimize(cert.accepted);
  }
}
BENCHMARK(BM_EquilibriumOracle)->Arg(5)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

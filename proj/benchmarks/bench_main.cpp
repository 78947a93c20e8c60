#include <benchmark/benchmark.h>

#include "gridclear/scenario.hpp"

namespace gc = gridclear;

namespace {

gc::ScenarioConfig reference() { return gc::load_scenario(std::string(GRIDCLEAR_DATA_DIR) + "/ieee123/scenario.json"); }

// Reference feeder with the first `count` DERs of the reference population.
gc::MarketContext subset(std::size_t count) {
  gc::MarketContext ctx = gc::load_market(reference());
  std::vector<gc::Der> ders(ctx.population->ders().begin(),
                            ctx.population->ders().begin() + static_cast<std::ptrdiff_t>(count));
  ctx.population = std::make_shared<const gc::DerPopulation>(*ctx.feeder.network, std::move(ders));
  return ctx;
}

void BM_BuildMatrices(benchmark::State& state) {
  const gc::Network net = gc::load_network(reference().feeder);
  for (auto _ : state) benchmark::DoNotOptimize(gc::build_matrices(net));
}
BENCHMARK(BM_BuildMatrices)->Unit(benchmark::kMillisecond);

void BM_SolveCombined(benchmark::State& state) {
  const gc::MarketContext ctx = subset(static_cast<std::size_t>(state.range(0)));
  const gc::TdopfProblem prob = ctx.problem();
  for (auto _ : state) benchmark::DoNotOptimize(gc::solve(prob));
}
BENCHMARK(BM_SolveCombined)->Arg(25)->Arg(100)->Arg(200)->Arg(350)->Unit(benchmark::kMillisecond);

void BM_RunMarketCaseC(benchmark::State& state) {
  const gc::ScenarioConfig cfg = reference();
  const gc::MarketContext ctx = gc::load_market(cfg);
  for (auto _ : state) benchmark::DoNotOptimize(gc::run_market(ctx, gc::CaseSelector::C, cfg.lmp));
}
BENCHMARK(BM_RunMarketCaseC)->Unit(benchmark::kMillisecond);

void BM_GeneratePopulation(benchmark::State& state) {
  const gc::ScenarioConfig cfg = reference();
  const gc::Network net = gc::load_network(cfg.feeder);
  for (auto _ : state) benchmark::DoNotOptimize(gc::generate_population(net, *cfg.generation));
}
BENCHMARK(BM_GeneratePopulation)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();

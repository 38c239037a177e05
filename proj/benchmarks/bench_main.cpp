#include <benchmark/benchmark.h>

#include <filesystem>
#include <vector>

#include "simdrift/adjustment.hpp"
#include "simdrift/config.hpp"
#include "simdrift/distribution.hpp"
#include "simdrift/estimators.hpp"
#include "simdrift/scm.hpp"

using namespace simdrift;

namespace {

std::filesystem::path asset(const char* p) { return std::filesystem::path(SIMDRIFT_ASSET_DIR) / p; }

void BM_Tvd(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  DiscreteDistribution p, q;
  for (std::size_t i = 0; i < k; ++i) {
    p.support.push_back("c" + std::to_string(i));
    p.probs.push_back(1.0 / static_cast<double>(k));
    q.probs.push_back(i == 0 ? 1.0 : 0.0);
  }
  q.support = p.support;
  for (auto _ : state) benchmark::DoNotOptimize(tvd(p, q));
}
BENCHMARK(BM_Tvd)->Arg(3)->Arg(16)->Arg(128);

void BM_LatentPosterior(benchmark::State& state) {
  RandomSpecDims dims;
  dims.n_x = static_cast<std::size_t>(state.range(0));
  dims.card = 3;
  const auto spec = generate_random_spec(1, dims, false);
  const Assignment assigned{{0, 1}, {1, 2}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(latent_posterior(spec, 0, 1, assigned, RespondentMode::abductive));
  }
  state.SetLabel(std::to_string(spec.x_states()) + " latent states");
}
BENCHMARK(BM_LatentPosterior)->Arg(1)->Arg(3)->Arg(6);

void BM_ExactEstimands(benchmark::State& state) {
  const auto spec = load_scm(asset("scm/drift3.json"));
  for (auto _ : state) benchmark::DoNotOptimize(exact_estimands(spec, 0, {}));
}
BENCHMARK(BM_ExactEstimands);

void BM_SimulateIteration(benchmark::State& state) {
  auto cfg = load_config(asset("configs/drift3.json"));
  cfg.personas.n = static_cast<std::size_t>(state.range(0));
  const auto rt = build_runtime(cfg);
  RunState s;
  s.personas = rt.personas;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_iteration(rt.experiment, s));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 2 * cfg.adjust.trials);
}
BENCHMARK(BM_SimulateIteration)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_BootstrapEffect(benchmark::State& state) {
  std::vector<PersonaCells> cells(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < cells.size(); ++i) {
    cells[i].outcome_mean = {0.3 + 0.001 * static_cast<double>(i % 50), 0.6};
  }
  const auto stat = [&](std::span<const std::size_t> s) { return observed_effect(cells, s).value; };
  for (auto _ : state) benchmark::DoNotOptimize(bootstrap_ci(stat, cells.size(), 1000, 0.95, 7));
}
BENCHMARK(BM_BootstrapEffect)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

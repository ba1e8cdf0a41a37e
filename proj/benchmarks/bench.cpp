// Timings for the hot paths: dataset generation, the two likelihood fits,
// the robust fit, and a full tuning sweep. Run with --benchmark_filter to
// focus on one of them.
#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "dtadpd/baseline.hpp"
#include "dtadpd/dpd.hpp"
#include "dtadpd/model.hpp"
#include "dtadpd/simulation.hpp"
#include "dtadpd/tuning.hpp"

namespace {

using namespace dtadpd;

ScenarioSpec spec_for(int n_studies) {
  ScenarioSpec spec;
  spec.n_studies = n_studies;
  // Two sensitivity outliers so the robust fit has real downweighting to do.
  spec.n_outlier_se = 2;
  return spec;
}

std::vector<LogitObservation> observations(int n_studies, std::uint64_t rep) {
  std::vector<LogitObservation> obs;
  for (const auto& counts : generate_dataset(spec_for(n_studies), rep))
    obs.push_back(logit_transform(counts));
  return obs;
}

void BM_generate_dataset(benchmark::State& state) {
  const ScenarioSpec spec = spec_for(int(state.range(0)));
  std::uint64_t rep = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(generate_dataset(spec, rep++ % 64));
}

void BM_fit_baseline_ml(benchmark::State& state) {
  const auto obs = observations(int(state.range(0)), 7);
  for (auto _ : state)
    benchmark::DoNotOptimize(fit_baseline(obs, BaselineMethod::ML));
}

void BM_fit_baseline_reml(benchmark::State& state) {
  const auto obs = observations(int(state.range(0)), 7);
  for (auto _ : state)
    benchmark::DoNotOptimize(fit_baseline(obs, BaselineMethod::REML));
}

void BM_fit_dpd(benchmark::State& state) {
  const auto obs = observations(int(state.range(0)), 7);
  for (auto _ : state)
    benchmark::DoNotOptimize(fit_dpd(obs, alpha_ges()));
}

void BM_select_alpha(benchmark::State& state) {
  const auto obs = observations(16, 7);
  GridSpec grid;
  grid.lo = 0.05;
  grid.hi = 0.50;
  grid.step = 0.05;
  for (auto _ : state)
    benchmark::DoNotOptimize(select_alpha(obs, grid));
}

}  // namespace

BENCHMARK(BM_generate_dataset)->Arg(8)->Arg(16);
BENCHMARK(BM_fit_baseline_ml)->Arg(8)->Arg(16)->Arg(32);
BENCHMARK(BM_fit_baseline_reml)->Arg(8)->Arg(16)->Arg(32);
BENCHMARK(BM_fit_dpd)->Arg(8)->Arg(16)->Arg(32);
BENCHMARK(BM_select_alpha)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

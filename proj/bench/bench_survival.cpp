// Serial reference vs OpenMP kernels on the same workloads. Both produce
// identical counts; only the wall time differs.

#include <omp.h>

#include <benchmark/benchmark.h>

#include "dirlab/stochastic.hpp"

using namespace dirlab;

namespace {

const Process kBM1 = Process::euclidean(1, GeneratorScale::probabilist);
const Domain& unit_interval() {
  static const Domain d = make_domain(kBM1.space(), interval(-1, 1));
  return d;
}
const Domain& koranyi_ball() {
  static const Domain d =
      make_domain(SpaceModel::heisenberg(GeneratorScale::probabilist), ball(Gauge{GaugeKind::koranyi, 1.0}, 1.0));
  return d;
}

void BM_survival_interval_ref(benchmark::State& st) {
  for (auto _ : st) {
    const auto b = survival_estimate_ref(kBM1, {0, 0, 0}, unit_interval(), 1.0, st.range(0), 0.01, true, 1);
    benchmark::DoNotOptimize(b.survived);
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_survival_interval_omp(benchmark::State& st) {
  omp_set_num_threads(static_cast<int>(st.range(1)));
  for (auto _ : st) {
    const auto b = survival_estimate(kBM1, {0, 0, 0}, unit_interval(), 1.0, st.range(0), 0.01, true, 1);
    benchmark::DoNotOptimize(b.survived);
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_survival_heisenberg_ref(benchmark::State& st) {
  const auto p = Process::heisenberg(GeneratorScale::probabilist);
  for (auto _ : st) {
    const auto b = survival_estimate_ref(p, {0, 0, 0}, koranyi_ball(), 0.2, st.range(0), 0.002, false, 2);
    benchmark::DoNotOptimize(b.survived);
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_survival_heisenberg_omp(benchmark::State& st) {
  const auto p = Process::heisenberg(GeneratorScale::probabilist);
  omp_set_num_threads(static_cast<int>(st.range(1)));
  for (auto _ : st) {
    const auto b = survival_estimate(p, {0, 0, 0}, koranyi_ball(), 0.2, st.range(0), 0.002, false, 2);
    benchmark::DoNotOptimize(b.survived);
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_dynkin_hunt_ref(benchmark::State& st) {
  const Domain d = make_domain(kBM1.space(), interval(0, 1));
  const BoundingBox cell{{0.495, 0, 0}, {0.505, 0, 0}};
  for (auto _ : st) benchmark::DoNotOptimize(dynkin_hunt_estimate_ref(kBM1, {0.5, 0, 0}, d, 0.1, cell, st.range(0), 1e-3, 3));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_dynkin_hunt_omp(benchmark::State& st) {
  const Domain d = make_domain(kBM1.space(), interval(0, 1));
  const BoundingBox cell{{0.495, 0, 0}, {0.505, 0, 0}};
  omp_set_num_threads(static_cast<int>(st.range(1)));
  for (auto _ : st) benchmark::DoNotOptimize(dynkin_hunt_estimate(kBM1, {0.5, 0, 0}, d, 0.1, cell, st.range(0), 1e-3, 3));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

}  // namespace

BENCHMARK(BM_survival_interval_ref)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_survival_interval_omp)->Args({100000, 1})->Args({100000, 2})->Args({100000, 4})->Args({100000, 8})
    ->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_survival_heisenberg_ref)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_survival_heisenberg_omp)->Args({20000, 1})->Args({20000, 2})->Args({20000, 4})->Args({20000, 8})
    ->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_dynkin_hunt_ref)->Arg(50000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_dynkin_hunt_omp)->Args({50000, 1})->Args({50000, 4})->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();

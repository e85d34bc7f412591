#include <benchmark/benchmark.h>

#include "phantom/bvp.hpp"
#include "phantom/folded.hpp"
#include "phantom/mmo.hpp"

using namespace phantom;

namespace {

const ParameterSet kParams = ParameterSet::reference().with_singular(0.05, 0.1);

void BM_Full4DCycle(benchmark::State& state) {
  const VectorField f = build_field(FieldTag::Full4D, kParams);
  Vec u0 = Vec::Zero(4);
  for (auto _ : state) {
    Trajectory t = integrate(f, u0, 0.0, 10.0, {1e-10, 1e-10});
    benchmark::DoNotOptimize(t.back());
  }
}
BENCHMARK(BM_Full4DCycle)->Unit(benchmark::kMillisecond);

void BM_Wiwo(benchmark::State& state) {
  const WiwoCoefficients k = WiwoCoefficients::from(kParams);
  double X0 = -0.3;
  for (auto _ : state) benchmark::DoNotOptimize(wiwo(X0, k));
}
BENCHMARK(BM_Wiwo);

void BM_H5(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(check_h5(kParams));
}
BENCHMARK(BM_H5)->Unit(benchmark::kMicrosecond);

void BM_SolvePeriodic(benchmark::State& state) {
  const PeriodicOrbit orb = find_periodic(kParams, Vec::Zero(4));
  CollocationOptions co;
  co.intervals = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(solve_periodic(kParams, orb.orbit, co).T);
}
BENCHMARK(BM_SolvePeriodic)->Arg(200)->Arg(400)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

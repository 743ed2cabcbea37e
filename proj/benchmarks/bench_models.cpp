#include <benchmark/benchmark.h>

#include "omcal/optomech.hpp"
#include "omcal/synth.hpp"

namespace {

using namespace omcal;

const ScenarioConfig& replica() {
  static const ScenarioConfig c = paper_replica_scenario();
  return c;
}

void S11Evaluation(benchmark::State& state) {
  const CavityParams dev{{5.154e9},
                         {constants::two_pi * 180e3},
                         {constants::two_pi * 270e3}};
  double f = 5.1538e9;
  for (auto _ : state) {
    benchmark::DoNotOptimize(s11_db(dev, Frequency{f}));
    f += 97.0;
    if (f > 5.1542e9) f = 5.1538e9;
  }
}
BENCHMARK(S11Evaluation);

void CavityLossModel(benchmark::State& state) {
  const ScenarioConfig& c = replica();
  double p = 1e-14;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        kappa_in_model(c.tls_cavity, c.f_c, Temperature{0.1}, Power{p}, true));
    p *= 1.3;
    if (p > 1e-10) p = 1e-14;
  }
}
BENCHMARK(CavityLossModel);

void TwpaTransmission(benchmark::State& state) {
  const ScenarioConfig& c = replica();
  double p = 1e-17;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        twpa_transmission(c.tls_twpa, c.f_c, Temperature{0.05}, Power{p}, true));
    p *= 1.5;
    if (p > 1e-11) p = 1e-17;
  }
}
BENCHMARK(TwpaTransmission);

void PhononConversion(benchmark::State& state) {
  const ScenarioConfig& c = replica();
  const Temperature t{0.1};
  const Power p{3e-12};
  const OptomechParams om = scenario_optomech(c, t, p);
  PhononAreaOptions opts;
  opts.measured_gamma_eff = AngularRate{constants::two_pi * 300.0};
  opts.allow_extrapolation = true;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        phonon_area(1e10, PumpScheme::Blue, t, p, om, c.tls_cavity, c.tls_twpa, c.chain, opts));
  }
}
BENCHMARK(PhononConversion);

void SweepGeneration(benchmark::State& state) {
  const ScenarioConfig& c = replica();
  for (auto _ : state) {
    benchmark::DoNotOptimize(gen_reflection_sweep(c, Temperature{0.1}, Power{1e-12}));
  }
}
BENCHMARK(SweepGeneration);

}  // namespace

BENCHMARK_MAIN();

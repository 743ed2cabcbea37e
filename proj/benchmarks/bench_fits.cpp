#include <benchmark/benchmark.h>

#include <cmath>

#include "omcal/pipeline.hpp"
#include "omcal/synth.hpp"

namespace {

using namespace omcal;

void ReflectionFitBench(benchmark::State& state) {
  ScenarioConfig c = paper_replica_scenario();
  c.sweep_points = static_cast<int>(state.range(0));
  const ReflectionTrace trace = gen_reflection_sweep(c, Temperature{0.1}, Power{1e-12});
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_reflection(trace));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(ReflectionFitBench)->Arg(101)->Arg(401)->Arg(1601)->Complexity();

void PeakFitBench(benchmark::State& state) {
  ScenarioConfig c = paper_replica_scenario();
  c.psd_points = static_cast<int>(state.range(0));
  const SidebandGenResult gen =
      gen_sideband_peak(c, Temperature{0.1}, Power{3e-12}, PumpScheme::Blue);
  for (auto _ : state) {
    benchmark::DoNotOptimize(integrate_peak(gen.spectrum));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(PeakFitBench)->Arg(301)->Arg(1201)->Arg(4801)->Complexity();

void TlsJointFitBench(benchmark::State& state) {
  const ScenarioConfig c = paper_replica_scenario();
  std::vector<TlsCavityPoint> pts;
  for (double t : c.temperatures_k)
    for (int i = 0; i < 12; ++i) {
      const double p = 1e-14 * std::pow(10.0, 4.0 * i / 11.0);
      pts.push_back({Temperature{t}, Power{p},
                     AngularRate{c.kappa_ext.rad_per_s +
                                 kappa_in_model(c.tls_cavity, c.f_c, Temperature{t}, Power{p},
                                                true)
                                     .rad_per_s}});
    }
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_tls_cavity(pts, c.kappa_ext, c.f_c));
  }
}
BENCHMARK(TlsJointFitBench);

void FullCalibrationBench(benchmark::State& state) {
  ScenarioConfig c = paper_replica_scenario();
  c.seed = 77;
  c.temperatures_k = {0.050, 0.100, 0.300};
  c.gamma_m.t_kelvin = c.temperatures_k;
  c.gamma_m.value = {constants::two_pi * 427.25, constants::two_pi * 434.5,
                     constants::two_pi * 463.5};
  c.tls_cavity.p_cav0.t_kelvin = c.temperatures_k;
  c.tls_cavity.p_cav0.value = {3.0e-13, 4.5e-13, 1.2e-12};
  c.tls_twpa.p_twpa0.t_kelvin = c.temperatures_k;
  c.tls_twpa.p_twpa0.value = {3.5e-13, 4.0e-13, 8.0e-13};
  c.sweep_points = 201;
  c.psd_points = 601;
  c.sideband.n_repeats = 2;
  c.include_twpa_on_scans = false;
  const Dataset ds = generate_dataset(c);
  CalibrationOptions opts;
  opts.mc_samples = 100;
  opts.threads = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_calibration(ds, opts));
  }
}
BENCHMARK(FullCalibrationBench)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

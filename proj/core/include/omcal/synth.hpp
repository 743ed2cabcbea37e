#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "omcal/dataset.hpp"
#include "omcal/optomech.hpp"

namespace omcal {

struct NoiseConfig {
  double sweep_db_sigma = 0.1;      // additive dB noise on reflection sweeps
  double area_rel_sigma = 0.05;     // multiplicative noise on sideband areas and scans
  double drift_rel_sigma = 0.10;    // run-to-run 1/f gain drift on sideband areas
  double psd_bin_rel_sigma = 0.01;  // per-bin relative noise on spectra
};

struct SidebandGrid {
  std::vector<double> powers_w_chip = {1e-12, 2e-12, 3.5e-12, 5e-12, 7e-12, 9e-12};
  double repeat_power_w_chip = 3.5e-12;
  int n_repeats = 6;  // repeat block for reproducibility statistics
  bool blue = true;
  bool red = true;
};

// Ground-truth scenario for the forward simulator. Defaults reproduce the
// measured device: 5.154 GHz cavity, 15.13 MHz drum mode, g0 = 2pi*220 Hz.
struct ScenarioConfig {
  std::uint64_t seed = 0;  // mandatory

  Frequency f_c;
  AngularRate kappa_ext;
  AngularRate omega_m;
  AngularRate g0;
  TempTable gamma_m;  // rad/s vs T

  TlsLossParams tls_cavity;
  TwpaTlsParams tls_twpa;
  ChainCal chain;

  std::vector<double> temperatures_k;
  std::vector<double> sweep_powers_w_chip;
  SidebandGrid sideband;
  std::vector<double> twpa_scan_powers_w;  // at the TWPA power reference plane

  NoiseConfig noise;
  double system_noise_quanta = 3.5;  // detection noise floor, TWPA-input referred
  double twpa_gain_db = 18.0;
  double sat_knee_w = 1e-16;  // TWPA-on saturation: first kink
  double sat_drop_w = 1e-14;  // hard drop
  bool asymmetry = false;     // blue area = n+1, red area = n
  bool include_selfosc_runs = true;
  bool include_twpa_on_scans = true;

  int sweep_points = 401;
  double sweep_span_linewidths = 20.0;
  int psd_points = 1201;
  double psd_span_linewidths = 60.0;

  void validate() const;
};

// The reference drumhead device, with TLS parameters giving the ~50%
// damping drop at 150 mK, kappa_tot ~ 3 MHz at 400 mK and a 40% TWPA
// transmission drop at 20 mK.
ScenarioConfig paper_replica_scenario();

ScenarioConfig load_scenario(const std::filesystem::path& file);
void save_scenario(const ScenarioConfig& config, const std::filesystem::path& file);

// --- individual generators (each draws from a stream keyed on the grid
// point, so datasets are bit-identical under any generation order) --------

ReflectionTrace gen_reflection_sweep(const ScenarioConfig& config, Temperature t, Power p_chip);

struct SidebandGenResult {
  SidebandSpectrum spectrum;
  double true_a_ph = 0.0;            // area in phonons before noise
  double true_gamma_eff_rad_s = 0.0; // generated linewidth
  bool self_oscillating = false;
};

SidebandGenResult gen_sideband_peak(const ScenarioConfig& config, Temperature t, Power p_pump_chip,
                                    PumpScheme scheme, int repeat = 0);

// TWPA-off scans measure the bare TLS transmission; the TWPA-on variant is
// gain-normalized and rolls off above the amplifier's saturation knee.
TwpaScan gen_twpa_scan(const ScenarioConfig& config, Temperature t,
                       TwpaPump pump = TwpaPump::Off);

// Full dataset over the (T, P, scheme) grid, ground truth embedded.
Dataset generate_dataset(const ScenarioConfig& config);

// Model helpers shared with tests.
OptomechParams scenario_optomech(const ScenarioConfig& config, Temperature t, Power p_chip);
double twpa_saturation_rolloff(const ScenarioConfig& config, double power_w);

}  // namespace omcal

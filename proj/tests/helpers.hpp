#pragma once

#include <cmath>

#include "omcal/synth.hpp"

namespace omcal::testing {

// Compact replica used by the synth/pipeline tests: same device, smaller
// grid, so full pipelines run in tens of milliseconds.
inline ScenarioConfig small_scenario(std::uint64_t seed = 11) {
  ScenarioConfig c = paper_replica_scenario();
  c.seed = seed;
  c.temperatures_k = {0.050, 0.100, 0.300};
  c.gamma_m.t_kelvin = c.temperatures_k;
  c.gamma_m.value = {constants::two_pi * 427.25, constants::two_pi * 434.5,
                     constants::two_pi * 463.5};
  c.tls_cavity.p_cav0.t_kelvin = c.temperatures_k;
  c.tls_cavity.p_cav0.value = {3.0e-13, 4.5e-13, 1.2e-12};
  c.tls_twpa.p_twpa0.t_kelvin = c.temperatures_k;
  c.tls_twpa.p_twpa0.value = {3.5e-13, 4.0e-13, 8.0e-13};
  c.sweep_powers_w_chip.clear();
  for (int i = 0; i < 8; ++i)
    c.sweep_powers_w_chip.push_back(1e-14 * std::pow(10.0, 4.0 * i / 7.0));
  c.twpa_scan_powers_w.clear();
  for (int i = 0; i < 15; ++i)
    c.twpa_scan_powers_w.push_back(1e-17 * std::pow(10.0, 6.0 * i / 14.0));
  c.sideband.n_repeats = 2;
  c.sweep_points = 201;
  c.psd_points = 601;
  c.include_twpa_on_scans = false;
  return c;
}

}  // namespace omcal::testing
